"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from pufferfish.audit import LaplaceNoise, audit_analytic
from pufferfish.calibrate import (
    DiscriminativePair,
    PrivacyBudget,
    calibrate_gmm,
    calibrate_sum_presence,
    calibrate_sum_value,
)
from pufferfish.errors import (
    ConvergenceError,
    DataError,
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    MarginalMismatchError,
    PufferfishError,
    QuadratureError,
    StructureError,
    UnresolvedSecretError,
)
from pufferfish.gmm import Gmm1D, PriorBelief, fit_em, load_gmm, save_json
from pufferfish.pipeline import (
    DatasetSpec,
    ensure_dir,
    fig2_table,
    privatize,
    read_dataset,
    read_population,
    write_table,
)
from pufferfish.specfun import DEFAULT_TAU_METHOD, TauMethod, tau_star

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

TAU_CHOICES = [m.value for m in TauMethod]

# Built-in defaults, applied after the config file and the command line.
DEFAULTS = {
    "epsilon": 1.0,
    "delta": 0.3,
    "tau_method": DEFAULT_TAU_METHOD.value,
    "components": 3,
    "seed": 0,
    "restarts": 5,
    "mu": 1.0,
    "sigma_sq": "1,4,9,16,25",
    "k_max": 50,
    "mode": "presence",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _budget_flags(p, delta=True):
    p.add_argument("--epsilon", type=float)
    if delta:
        p.add_argument("--delta", type=float)
    p.add_argument("--tau-method", dest="tau_method", choices=TAU_CHOICES)


def _fit_flags(p):
    p.add_argument("--components", type=int, help="mixture components per secret (default 3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pufferfish", description="Laplace noise calibration for pufferfish privacy.")
    parser.add_argument("--config", help="JSON file whose keys mirror the long flags; flags win")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tau", help="print the Gaussian tail multiplier for a delta")
    p.add_argument("--delta", type=float)
    p.add_argument("--tau-method", dest="tau_method", choices=TAU_CHOICES)

    p = sub.add_parser("fig2", help="presence bound vs number of identical users, as CSV")
    _budget_flags(p)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma-sq", dest="sigma_sq", help="comma-separated variances")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--out", help="directory for fig2.csv (stdout if omitted)")

    p = sub.add_parser("privatize", help="fit, calibrate, add noise and audit a CSV column")
    p.add_argument("input", help="CSV file")
    p.add_argument("--secret-column", dest="secret_column", required=False)
    p.add_argument("--value-column", dest="value_column", required=False)
    p.add_argument("--secrets", help="comma-separated allow-list of secret values")
    p.add_argument("--pair", action="append", dest="pairs", metavar="S_I:S_J",
                   help="discriminative pair (repeatable; default: all pairs)")
    p.add_argument("--belief", action="append", dest="beliefs", metavar="JSON",
                   help="pre-fitted belief file (repeatable); skips fitting")
    _budget_flags(p)
    _fit_flags(p)
    p.add_argument("--out", required=False)

    p = sub.add_parser("sum-calibrate", help="noise scale for a sum query over independent users")
    p.add_argument("--population", help="CSV with columns user_id, mu, sigma")
    p.add_argument("--mode", choices=["presence", "value"])
    p.add_argument("--a", type=float)
    p.add_argument("--a-prime", dest="a_prime", type=float)
    _budget_flags(p)

    p = sub.add_parser("audit", help="analytic audit of two model JSON files")
    p.add_argument("model_i")
    p.add_argument("model_j")
    p.add_argument("--b", type=float, help="Laplace scale (default: calibrate from the models)")
    _budget_flags(p)

    p = sub.add_parser("fit", help="fit a mixture to one column of a CSV")
    p.add_argument("input", help="CSV file")
    p.add_argument("--value-column", dest="value_column")
    p.add_argument("--secret-column", dest="secret_column")
    p.add_argument("--secret", help="fit only rows whose secret column equals this value")
    _fit_flags(p)
    p.add_argument("--out", help="directory for the model JSON (stdout if omitted)")
    return parser


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    config = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"no such config file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise DataError(f"config {args.config} must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    merged = vars(args).copy()
    for key, value in merged.items():
        if value is None:
            if key in config:
                merged[key] = config[key]
            elif key in DEFAULTS:
                merged[key] = DEFAULTS[key]
    return argparse.Namespace(**merged)


def _budget(a) -> PrivacyBudget:
    return PrivacyBudget(float(a.epsilon), float(a.delta), TauMethod.parse(a.tau_method))


def _print_json(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _require(a, *names):
    missing = [n for n in names if getattr(a, n, None) in (None, "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{a.command} needs {flags}")


def cmd_tau(a) -> int:
    _require(a, "delta")
    method = TauMethod.parse(a.tau_method)
    _print_json({"delta": float(a.delta), "method": method.value, "tau": tau_star(float(a.delta), method)})
    return EXIT_OK


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse a list of numbers from {text!r}") from None


def cmd_fig2(a) -> int:
    header, rows = fig2_table(float(a.mu), _floats(a.sigma_sq), _budget(a), int(a.k_max))
    if a.out:
        path = ensure_dir(a.out) / "fig2.csv"
        write_table(path, header, rows)
        print(path)
    else:
        write_table(sys.stdout, header, rows)
    return EXIT_OK


def _parse_pairs(items) -> tuple[DiscriminativePair, ...]:
    pairs = []
    for item in items or ():
        if isinstance(item, (list, tuple)) and len(item) == 2:
            s_i, s_j = item
        elif isinstance(item, str) and item.count(":") == 1:
            s_i, s_j = item.split(":")
        else:
            raise UsageError(f"pair {item!r} must look like S_I:S_J")
        pairs.append(DiscriminativePair(str(s_i), str(s_j)))
    return tuple(pairs)


def _load_belief(path) -> PriorBelief:
    try:
        with open(path, encoding="utf-8") as fh:
            return PriorBelief.from_dict(json.load(fh))
    except FileNotFoundError:
        raise DataError(f"no such belief file: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path} is not a belief file: {exc}") from None


def cmd_privatize(a) -> int:
    _require(a, "secret_column", "value_column", "out")
    secrets = a.secrets
    if isinstance(secrets, str):
        secrets = [s for s in secrets.split(",") if s]
    spec = DatasetSpec(
        path=a.input,
        secret_column=a.secret_column,
        value_column=a.value_column,
        secret_values=tuple(secrets) if secrets else None,
        pairs=_parse_pairs(a.pairs),
    )
    beliefs = [_load_belief(p) for p in a.beliefs] if a.beliefs else None
    outcome = privatize(spec, _budget(a), a.out, k=int(a.components), seed=int(a.seed),
                        restarts=int(a.restarts), beliefs=beliefs)
    _print_json({
        "b": outcome.calibration.b,
        "rule": outcome.calibration.rule,
        "files": outcome.files,
    })
    return EXIT_OK


def cmd_sum_calibrate(a) -> int:
    if a.mode == "value":
        _require(a, "a", "a_prime", "epsilon")
        result = calibrate_sum_value(float(a.a), float(a.a_prime), float(a.epsilon))
    else:
        _require(a, "population")
        result = calibrate_sum_presence(read_population(a.population), _budget(a))
    _print_json(result.to_dict())
    return EXIT_OK


def _load_model(path) -> Gmm1D:
    try:
        return load_gmm(path)
    except FileNotFoundError:
        raise DataError(f"no such model file: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path} is not a model file: {exc}") from None


def cmd_audit(a) -> int:
    prior_i, prior_j = _load_model(a.model_i), _load_model(a.model_j)
    payload = {}
    b = a.b
    if b is None:
        belief = PriorBelief("models", {"i": prior_i, "j": prior_j})
        result = calibrate_gmm([belief], [DiscriminativePair("i", "j")], _budget(a))
        payload["calibration"] = result.to_dict()
        b = result.b
    if not b > 0:
        raise DomainError(f"audit needs a positive noise scale, got b={b}")
    report = audit_analytic(prior_i, prior_j, LaplaceNoise(float(b)), float(a.epsilon),
                            delta_target=None if a.delta is None else float(a.delta))
    payload.update({"b": float(b), "report": report.to_dict()})
    _print_json(payload)
    return EXIT_OK


def cmd_fit(a) -> int:
    _require(a, "value_column")
    if a.secret is not None:
        _require(a, "secret_column")
        data = read_dataset(DatasetSpec(a.input, a.secret_column, a.value_column,
                                        secret_values=(str(a.secret),)))
        x = data.groups[str(a.secret)]
    else:
        data = read_dataset(DatasetSpec(a.input, a.value_column, a.value_column))
        x = data.values
    k = int(a.components)
    if len(x) < 2 * k:
        raise InsufficientDataError(f"{len(x)} rows cannot support k={k} components (need {2 * k})")
    model = fit_em(np.asarray(x), k, seed=int(a.seed), restarts=int(a.restarts))
    if a.out:
        name = "model.json" if a.secret is None else f"model_{a.secret}.json"
        path = ensure_dir(a.out) / name
        save_json(model, path)
        print(path)
    else:
        _print_json(model.to_dict())
    return EXIT_OK


COMMANDS = {
    "tau": cmd_tau,
    "fig2": cmd_fig2,
    "privatize": cmd_privatize,
    "sum-calibrate": cmd_sum_calibrate,
    "audit": cmd_audit,
    "fit": cmd_fit,
}

_DATA_ERRORS = (DataError, InsufficientDataError, UnresolvedSecretError, MarginalMismatchError,
                StructureError, OSError)
_NUMERIC_ERRORS = (ConvergenceError, QuadratureError, DegenerateFitError, FloatingPointError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge(args)
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"pufferfish {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"pufferfish {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"pufferfish {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PufferfishError as exc:
        print(f"pufferfish {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
