"""Command-line interface.

Exit codes: 0 success (``fit``: converged), 1 I/O or parse error,
2 validation failure, 3 iteration cap reached.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .presets import (
    Kind,
    ModelFormatError,
    fit_constrained,
    format_model,
    load_model,
    make_constraints,
    predict,
)
from .problem import (
    Hyperparameters,
    LinearConstraints,
    ProblemValidationError,
    TrainingSet,
    hyperparameter_violations,
    validate_problem,
)

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    """Unreadable or malformed input (exit code 1)."""


class ValidationFailure(Exception):
    """Well-formed input describing an invalid problem (exit code 2)."""


# -- input helpers -----------------------------------------------------------

def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file, expected a header row")
    return [c.strip() for c in rows[0]], rows[1:]


def _floats(path, rows, width) -> np.ndarray:
    out = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"{path}: line {r + 2} has {len(row)} fields, expected {width}")
        try:
            out[r] = [float(c) for c in row]
        except ValueError as exc:
            raise InputError(f"{path}: line {r + 2}: {exc}") from exc
    return out


def _feature_columns(path, header: list[str]) -> list[int]:
    xs = {name: k for k, name in enumerate(header) if name.startswith("x")}
    p = len(xs)
    cols = []
    for k in range(1, p + 1):
        name = f"x{k}"
        if name not in xs:
            raise InputError(f"{path}: missing column {name!r}")
        cols.append(xs[name])
    return cols


def read_training_csv(path) -> TrainingSet:
    """``y,x1..xp`` with a header row."""
    header, rows = _read_rows(path)
    if "y" not in header:
        raise InputError(f"{path}: missing column 'y'")
    cols = _feature_columns(path, header)
    if not cols:
        raise InputError(f"{path}: missing column 'x1'")
    data = _floats(path, rows, len(header))
    return TrainingSet(data[:, cols].reshape(len(rows), len(cols)), data[:, header.index("y")])


def read_feature_csv(path, p: int) -> np.ndarray:
    header, rows = _read_rows(path)
    cols = _feature_columns(path, header)
    if len(cols) != p:
        raise ValidationFailure(f"{path}: model expects {p} features, file has {len(cols)}")
    data = _floats(path, rows, len(header))
    return data[:, cols].reshape(len(rows), p)


def read_matrix(path, ncols: int | None = None) -> np.ndarray:
    """Headerless numeric CSV."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    try:
        M = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if rows and len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: ragged rows")
    if M.size == 0:
        M = M.reshape(0, ncols or 0)
    return M


def constraints_from_args(args, p: int) -> LinearConstraints:
    custom = [getattr(args, k) for k in ("A", "b", "Gamma", "d")]
    if args.preset != "custom":
        if any(custom):
            raise ValidationFailure("--A/--b/--Gamma/--d require --preset custom")
        return make_constraints(args.preset, p, decreasing=args.decreasing)
    if (args.A is None) != (args.b is None) or (args.Gamma is None) != (args.d is None):
        raise ValidationFailure("--A needs --b and --Gamma needs --d")
    A = read_matrix(args.A, p) if args.A else np.zeros((0, p))
    b = read_matrix(args.b).ravel() if args.b else np.zeros(0)
    G = read_matrix(args.Gamma, p) if args.Gamma else np.zeros((0, p))
    d = read_matrix(args.d).ravel() if args.d else np.zeros(0)
    try:
        return LinearConstraints(A, b, G, d)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc


def hyperparameters_from_args(args) -> Hyperparameters:
    hp = Hyperparameters(C=args.C, nu=args.nu, tau=args.tau, max_iter=args.max_iter)
    bad = hyperparameter_violations(hp)
    if bad:
        raise ValidationFailure("; ".join(bad))
    return hp


def effective_seed(args) -> int:
    env = os.environ.get("LCSVR_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"LCSVR_SEED must be an integer, got {env!r}") from exc
    return args.seed


def _kv(out, **items) -> None:
    for k, v in items.items():
        out.write(f"{k}={ex._fmt(v)}\n")


# -- commands ----------------------------------------------------------------

def _problem(args, check_hp: bool = True):
    ts = read_training_csv(args.train)
    try:
        lc = constraints_from_args(args, ts.p)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    if check_hp:
        return ts, lc, hyperparameters_from_args(args)
    return ts, lc, Hyperparameters(C=args.C, nu=args.nu, tau=args.tau, max_iter=args.max_iter)


def cmd_fit(args, out) -> int:
    ts, lc, hp = _problem(args)
    kind = Kind(args.preset)
    try:
        model = fit_constrained(ts, lc, hp, kind, gamma_rule=args.gamma_rule)
    except ProblemValidationError as exc:
        raise ValidationFailure(str(exc.result)) from exc
    ex.atomic_write(args.out, format_model(model))
    rep = model.report
    _kv(out, termination=rep.termination.value, iterations=rep.iterations,
        final_delta=float(rep.final_delta), epsilon=float(model.epsilon),
        intercept=float(model.beta0), objective=float(rep.final_objective))
    return EXIT_OK if rep.converged else EXIT_CAP


def cmd_predict(args, out) -> int:
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise InputError(f"cannot read {args.model}: {exc.strerror or exc}") from exc
    except ModelFormatError as exc:
        raise InputError(f"{args.model}: {exc}") from exc
    X = read_feature_csv(args.data, model.beta.size)
    yhat = predict(model, X) if X.shape[0] else np.zeros(0)
    ex.atomic_write(args.out, ex.csv_text(("yhat",), ([float(v)] for v in yhat)))
    _kv(out, rows=int(yhat.size))
    return EXIT_OK


def cmd_validate(args, out) -> int:
    ts, lc, hp = _problem(args, check_hp=False)
    res = validate_problem(ts, lc, hp)
    out.write(f"{res}\n")
    return EXIT_OK if res.ok else EXIT_INVALID


def _parse_floats(text: str | None):
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


def cmd_experiment(args, out) -> int:
    cfg = ex.ScenarioConfig(
        n=args.n, p=args.p, snr=tuple(args.snr), noise=args.noise, reps=args.reps,
        seed=effective_seed(args), folds=args.folds, tau=args.tau, C=args.C, nu=args.nu,
        jobs=args.jobs, estimators=tuple(args.estimators.split(",")) if args.estimators else (),
    )
    cfg = ex.with_overrides(cfg, C_grid=_parse_floats(args.C_grid), nu_grid=_parse_floats(args.nu_grid))
    try:
        cfg.selected(args.scenario)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    bad = [msg for C in (cfg.C, *cfg.C_grid) for nu in (cfg.nu, *cfg.nu_grid)
           for msg in hyperparameter_violations(Hyperparameters(C=C, nu=nu, tau=cfg.tau))]
    if bad or cfg.reps < 1 or cfg.folds < 2 or cfg.jobs < 1:
        raise ValidationFailure("; ".join(sorted(set(bad))) or "reps, jobs must be >= 1 and folds >= 2")
    result = ex.run_scenario(args.scenario, cfg, out_dir=args.out_dir)
    for row in result.summary():
        _kv(out, **{k: row[k] for k in ("noise", "snr_db", "estimator", "rmse_mean", "mae_mean")})
    return EXIT_OK


def cmd_trajectory(args, out) -> int:
    seed = effective_seed(args)
    hp = hyperparameters_from_args(args)
    clean, _ = ex.gen_simplex(args.n, args.p, seed)
    ts = clean
    if args.noise != "none":
        ts = TrainingSet(clean.X, ex.add_noise(clean.y, ex.NoiseSpec(args.noise, args.snr, seed)))
    code = EXIT_OK
    files = {}
    for kind in ("svr", "ssvr"):
        model = fit_constrained(ts, make_constraints(kind, ts.p), hp, kind, record_trajectory=True)
        files[f"trajectory_{kind}.csv"] = ex.trajectory_csv(model.report.trajectory)
        _kv(out, estimator=kind, iterations=model.report.iterations,
            termination=model.report.termination.value,
            final_objective=float(model.report.final_objective))
        if not model.report.converged:
            code = EXIT_CAP
    for name, text in files.items():
        ex.atomic_write(Path(args.out_dir) / name, text)
    return code


# -- parser ------------------------------------------------------------------

def _add_hp(p, C=1.0, nu=0.5):
    p.add_argument("--C", type=float, default=C)
    p.add_argument("--nu", type=float, default=nu)
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)


def _add_problem(p):
    p.add_argument("--train", required=True, help="CSV with header y,x1..xp")
    p.add_argument("--preset", default="svr", choices=["svr", "nnsvr", "ssvr", "isvr", "custom"])
    p.add_argument("--decreasing", action="store_true", help="isotonic presets: non-increasing order")
    for name in ("A", "b", "Gamma", "d"):
        p.add_argument(f"--{name}", default=None, help="headerless CSV (custom constraints)")
    _add_hp(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcsvr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a constrained nu-SVR and write the model file")
    _add_problem(p)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma-rule", dest="gamma_rule", default="complementary",
                   choices=["complementary", "literal"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV with header x1..xp (a y column is ignored)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="check a problem without solving it")
    _add_problem(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("experiment", help="run a synthetic benchmark scenario")
    p.add_argument("--scenario", required=True, choices=list(ex.SCENARIO_ESTIMATORS))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=20)
    p.add_argument("--snr", type=float, nargs="+", default=[10.0])
    p.add_argument("--noise", default="gaussian", choices=["gaussian", "laplacian"])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--C-grid", dest="C_grid", default=None, help="comma-separated C values")
    p.add_argument("--nu-grid", dest="nu_grid", default=None, help="comma-separated nu values")
    p.add_argument("--estimators", default=None, help="comma-separated subset to run")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    _add_hp(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("trajectory", help="SVR vs SSVR solver trajectories on simplex data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="none", choices=["none", "gaussian", "laplacian"])
    p.add_argument("--snr", type=float, default=30.0)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=25)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    _add_hp(p)
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_IO
    except ValidationFailure as exc:
        err.write(f"invalid problem: {exc}\n")
        return EXIT_INVALID
    except ProblemValidationError as exc:
        err.write(f"invalid problem: {exc.result}\n")
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
