import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one status line per acceptance criterion."""
    def record(number, ok, detail):
        _ACCEPTANCE.append((number, "PASS" if ok else "FAIL", detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{status}] criterion {number}: {detail}")
