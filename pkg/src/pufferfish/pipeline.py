"""CSV-to-report workflow: group a value column by a secret column, fit a
mixture per secret, calibrate Laplace noise over the discriminative pairs,
privatize the column and audit the result.

All outputs are deterministic functions of the inputs and the seed.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
import os
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from pufferfish.audit import (
    AuditReport,
    LaplaceNoise,
    audit_analytic,
    audit_empirical,
    laplace_sample,
    write_histogram_csv,
)
from pufferfish.calibrate import (
    CalibrationResult,
    DiscriminativePair,
    PrivacyBudget,
    UserPopulation,
    sum_bound_curve,
)
from pufferfish.calibrate import calibrate_gmm
from pufferfish.errors import DataError, InsufficientDataError
from pufferfish.gmm import PriorBelief, fit_em, save_json


@dataclasses.dataclass(frozen=True)
class DatasetSpec:
    path: str
    secret_column: str
    value_column: str
    secret_values: tuple[str, ...] | None = None
    pairs: tuple[DiscriminativePair, ...] = ()


@dataclasses.dataclass
class Dataset:
    header: list[str]
    rows: list[list[str]]
    value_index: int
    secret_index: int
    values: np.ndarray
    groups: dict[str, np.ndarray]


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not UTF-8: {exc}") from None
    if header is None:
        raise DataError(f"{path} is empty")
    return header, rows


def _column(header: list[str], name: str, path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise DataError(f"column {name!r} not found in {path} (columns: {', '.join(header)})") from None


def read_dataset(spec: DatasetSpec) -> Dataset:
    """Load and validate a CSV, rejecting any row whose value does not parse."""
    header, rows = _read_csv(spec.path)
    vi = _column(header, spec.value_column, spec.path)
    si = _column(header, spec.secret_column, spec.path)
    values = np.empty(len(rows))
    bad = []
    for r, row in enumerate(rows):
        line = r + 2  # header is line 1
        if len(row) != len(header):
            bad.append(f"line {line}: expected {len(header)} fields, got {len(row)}")
            continue
        try:
            v = float(row[vi])
        except ValueError:
            bad.append(f"line {line}: {spec.value_column}={row[vi]!r} is not a number")
            continue
        if not math.isfinite(v):
            bad.append(f"line {line}: {spec.value_column}={row[vi]!r} is not finite")
            continue
        values[r] = v
    if bad:
        more = f" (and {len(bad) - 10} more)" if len(bad) > 10 else ""
        raise DataError("unparseable rows: " + "; ".join(bad[:10]) + more)

    secrets = [row[si] for row in rows]
    allowed = spec.secret_values
    groups: dict[str, list[float]] = {}
    for s, v in zip(secrets, values):
        if allowed is None or s in allowed:
            groups.setdefault(s, []).append(v)
    for s in allowed or ():
        if s not in groups:
            raise DataError(f"secret value {s!r} does not occur in column {spec.secret_column!r}")
    for pair in spec.pairs:
        for s in pair.as_list():
            if s not in groups:
                raise DataError(f"secret {s!r} from pair {pair.as_list()} has no rows")
    return Dataset(
        header=header,
        rows=rows,
        value_index=vi,
        secret_index=si,
        values=values,
        groups={s: np.asarray(v) for s, v in sorted(groups.items())},
    )


def default_pairs(secrets: Sequence[str]) -> tuple[DiscriminativePair, ...]:
    return tuple(DiscriminativePair(a, b) for a, b in itertools.combinations(secrets, 2))


def fit_priors(groups: dict[str, np.ndarray], k: int, seed: int, restarts: int,
               label: str = "fitted") -> PriorBelief:
    """One mixture per secret; secrets with fewer than ``2k`` rows abort the fit."""
    priors = {}
    for secret, x in groups.items():
        if len(x) < 2 * k:
            raise InsufficientDataError(
                f"secret {secret!r} has {len(x)} rows; k={k} components need at least {2 * k}"
            )
        priors[secret] = fit_em(x, k, seed=seed, restarts=restarts)
    return PriorBelief(label, priors)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_") or "secret"


def _dump(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclasses.dataclass
class PrivatizeOutcome:
    calibration: CalibrationResult
    beliefs: list[PriorBelief]
    analytic: list[tuple[str, DiscriminativePair, AuditReport | None]]
    empirical_original: list[tuple[DiscriminativePair, AuditReport]]
    empirical_noised: list[tuple[DiscriminativePair, AuditReport]]
    noised_values: np.ndarray
    files: dict[str, str]


def privatize(spec: DatasetSpec, budget: PrivacyBudget, out_dir, *, k: int = 3, seed: int = 0,
              restarts: int = 5, beliefs: Sequence[PriorBelief] | None = None) -> PrivatizeOutcome:
    """Fit priors (unless ``beliefs`` are given), calibrate, add noise, audit, write outputs.

    Writes into ``out_dir``: ``noised.csv``, ``report.json``, ``models/*.json`` and
    ``histograms/{original,noised}_<i>__<j>.csv``.
    """
    data = read_dataset(spec)
    pairs = spec.pairs or default_pairs(list(data.groups))
    if not pairs:
        raise DataError("need at least two secrets (or explicit pairs) to calibrate")
    if beliefs is None:
        used_secrets = sorted({s for p in pairs for s in p.as_list()})
        beliefs = [fit_priors({s: data.groups[s] for s in used_secrets}, k, seed, restarts)]
    beliefs = list(beliefs)

    result = calibrate_gmm(beliefs, pairs, budget)
    n = len(data.rows)
    if result.b > 0:
        noise = LaplaceNoise(result.b)
        z = laplace_sample(noise, seed, n)
    else:
        noise = None
        z = np.zeros(n)
    noised = data.values + z

    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "histograms").mkdir(parents=True, exist_ok=True)
    files = {}

    noised_path = out / "noised.csv"
    with open(noised_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.header)
        for row, y in zip(data.rows, noised):
            row = list(row)
            row[data.value_index] = repr(float(y))
            writer.writerow(row)
    files["noised"] = str(noised_path)

    for bi, belief in enumerate(beliefs):
        path = out / "models" / f"belief_{bi}_{_slug(belief.label)}.json"
        save_json(belief, path)
        files[f"belief:{belief.label}"] = str(path)

    secret_of_row = [row[data.secret_index] for row in data.rows]
    noised_groups = {
        s: noised[[i for i, t in enumerate(secret_of_row) if t == s]] for s in data.groups
    }

    analytic = []
    for belief in beliefs:
        for pair in pairs:
            rep = None
            if noise is not None:
                rep = audit_analytic(belief[pair.s_i], belief[pair.s_j], noise, budget.epsilon,
                                     delta_target=budget.delta)
            analytic.append((belief.label, pair, rep))

    emp_orig, emp_noised = [], []
    for pi, pair in enumerate(pairs):
        tag = f"{pi}_{_slug(pair.s_i)}__{_slug(pair.s_j)}"
        for kind, groups, sink in (("original", data.groups, emp_orig),
                                   ("noised", noised_groups, emp_noised)):
            rep = audit_empirical(groups[pair.s_i], groups[pair.s_j], budget.epsilon,
                                  delta_target=budget.delta)
            sink.append((pair, rep))
            path = out / "histograms" / f"{kind}_{tag}.csv"
            write_histogram_csv(path, rep.histogram)
            files[f"hist:{kind}:{tag}"] = str(path)

    report = {
        "input": {
            "path": str(spec.path),
            "secret_column": spec.secret_column,
            "value_column": spec.value_column,
            "rows": n,
            "secret_counts": {s: int(len(v)) for s, v in data.groups.items()},
        },
        "settings": {"components": k, "seed": seed, "restarts": restarts},
        "calibration": result.to_dict(),
        "audits": {
            "analytic": [
                {"adversary": label, "pair": pair.as_list(),
                 "report": None if rep is None else rep.to_dict()}
                for label, pair, rep in analytic
            ],
            "empirical_original": [{"pair": p.as_list(), "report": r.to_dict()} for p, r in emp_orig],
            "empirical_noised": [{"pair": p.as_list(), "report": r.to_dict()} for p, r in emp_noised],
        },
    }
    report_path = out / "report.json"
    _dump(report_path, report)
    files["report"] = str(report_path)

    return PrivatizeOutcome(result, beliefs, analytic, emp_orig, emp_noised, noised, files)


def fig2_table(mu: float, sigma_sq: Sequence[float], budget: PrivacyBudget,
               k_max: int) -> tuple[list[str], list[list[float]]]:
    """Presence bound for identical users, one column per variance, rows ``K = 1..k_max``."""
    columns = [sum_bound_curve(mu, math.sqrt(s), budget, k_max) for s in sigma_sq]
    header = ["K"] + [f"sigma_sq={s:g}" for s in sigma_sq]
    rows = [[k] + [col[k - 1][1] for col in columns] for k in range(1, k_max + 1)]
    return header, rows


def write_table(path_or_file, header, rows) -> None:
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def read_population(path) -> UserPopulation:
    """Users from a CSV with columns ``user_id, mu, sigma``."""
    header, rows = _read_csv(path)
    mi = _column(header, "mu", path)
    si = _column(header, "sigma", path)
    users = []
    for r, row in enumerate(rows):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            users.append((float(row[mi]), float(row[si])))
        except (ValueError, IndexError):
            raise DataError(f"line {r + 2}: cannot parse mu/sigma from {row}") from None
    if not users:
        raise DataError(f"{path} lists no users")
    if any(s < 0 for _, s in users):
        raise DataError(f"{path}: sigma must be >= 0")
    return UserPopulation(tuple(users))


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
