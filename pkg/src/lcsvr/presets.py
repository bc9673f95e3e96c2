"""Estimator-level API: preset constraint families, fit / predict, the
projection baselines and the flat-text model format."""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dual import DualProblem, recover_beta, recover_intercept_epsilon
from .problem import (
    Hyperparameters,
    LinearConstraints,
    PrimalSolution,
    ProblemValidationError,
    TrainingSet,
    validate_problem,
)
from .solver import SolveReport, solve


class Kind(str, enum.Enum):
    SVR = "svr"
    NNSVR = "nnsvr"
    SSVR = "ssvr"
    ISVR = "isvr"
    CUSTOM = "custom"
    PSVR = "p-svr"
    CIBERSORT = "cibersort"


def make_constraints(kind: Kind | str, p: int, decreasing: bool = False) -> LinearConstraints:
    """Constraints of a preset.

    ``ISVR`` rows are ``e_i - e_{i+1}``, i.e. ``beta_1 <= ... <= beta_p``;
    ``decreasing=True`` flips them.
    """
    kind = Kind(kind)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    empty = np.zeros((0, p))
    if kind is Kind.SVR:
        return LinearConstraints.empty(p)
    if kind is Kind.NNSVR:
        return LinearConstraints(-np.eye(p), np.zeros(p), empty, np.zeros(0))
    if kind is Kind.SSVR:
        return LinearConstraints(-np.eye(p), np.zeros(p), np.ones((1, p)), np.ones(1))
    if kind is Kind.ISVR:
        if p < 2:
            raise ValueError("isotonic constraints need p >= 2")
        A = np.eye(p - 1, p) - np.eye(p - 1, p, k=1)
        if decreasing:
            A = -A
        return LinearConstraints(A, np.zeros(p - 1), empty, np.zeros(0))
    raise ValueError(f"no constraint preset for kind {kind.value!r}")


@dataclass(frozen=True)
class FittedModel:
    solution: PrimalSolution
    kind: Kind
    hyperparameters: Hyperparameters
    report: SolveReport | None = None
    theta: np.ndarray | None = None

    @property
    def beta(self) -> np.ndarray:
        return self.solution.beta

    @property
    def beta0(self) -> float:
        return self.solution.beta0

    @property
    def epsilon(self) -> float:
        return self.solution.epsilon


def primal_from_dual(dp: DualProblem, theta, beta=None) -> PrimalSolution:
    theta = np.asarray(theta, dtype=float)
    if beta is None:
        beta = recover_beta(dp, theta)
    est = recover_intercept_epsilon(dp, theta, beta)
    n = dp.ts.n
    support = (theta[:n] - theta[n:2 * n]) != 0
    return PrimalSolution(beta, est.beta0, est.epsilon, support, est.degenerate)


def fit_constrained(ts: TrainingSet, lc: LinearConstraints, hp: Hyperparameters,
                    kind: Kind | str = Kind.CUSTOM, record_trajectory: bool = False,
                    **solve_kw) -> FittedModel:
    """Validate, solve the dual with generalized SMO and recover the primal model."""
    res = validate_problem(ts, lc, hp)
    if not res.ok:
        raise ProblemValidationError(res)
    dp = DualProblem(ts, lc, hp)
    state, report = solve(dp, record_trajectory, **solve_kw)
    return FittedModel(primal_from_dual(dp, state.theta), Kind(kind), hp, report, state.theta.copy())


def fit(ts: TrainingSet, kind: Kind | str, hp: Hyperparameters, record_trajectory: bool = False,
        decreasing: bool = False, **solve_kw) -> FittedModel:
    kind = Kind(kind)
    lc = make_constraints(kind, ts.p, decreasing=decreasing)
    return fit_constrained(ts, lc, hp, kind, record_trajectory, **solve_kw)


def predict(m: FittedModel, Xnew) -> np.ndarray:
    Xnew = np.asarray(Xnew, dtype=float)
    if Xnew.ndim == 1:
        Xnew = Xnew.reshape(1, -1)
    if Xnew.shape[1] != m.beta.shape[0]:
        raise ValueError(f"expected {m.beta.shape[0]} features, got {Xnew.shape[1]}")
    return Xnew @ m.beta + m.beta0


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    x = np.maximum(v - theta, 0.0)
    # remove the last ulps of the sum error on the support
    support = x > 0
    x[support] -= (x.sum() - 1.0) / support.sum()
    return np.maximum(x, 0.0)


def fit_projected(ts: TrainingSet, hp: Hyperparameters, target: str, **solve_kw) -> FittedModel:
    """Unconstrained SVR followed by a projection of ``beta``.

    ``target`` is ``"positive_orthant"`` (P-SVR) or ``"simplex"`` (the
    Cibersort estimator). The intercept and tube width are re-estimated for
    the projected coefficients using the free sets of the SVR dual solution.
    """
    base = fit(ts, Kind.SVR, hp, **solve_kw)
    if target == "positive_orthant":
        beta, kind = np.maximum(base.beta, 0.0), Kind.PSVR
    elif target == "simplex":
        beta, kind = project_simplex(base.beta), Kind.CIBERSORT
    else:
        raise ValueError(f"unknown projection target {target!r}")
    dp = DualProblem(ts, LinearConstraints.empty(ts.p), hp)
    sol = primal_from_dual(dp, base.theta, beta)
    return FittedModel(sol, kind, hp, base.report, base.theta)


def constraint_tolerance(beta) -> float:
    return 1e-3 * (1.0 + float(np.max(np.abs(beta), initial=0.0)))


def satisfies_preset(m: FittedModel, decreasing: bool = False) -> bool:
    """Post-fit check of the preset's constraints at ``1e-3 (1 + ||beta||_inf)``."""
    beta = m.beta
    tol = constraint_tolerance(beta)
    if m.kind in (Kind.NNSVR, Kind.PSVR):
        return bool(np.all(beta >= -tol))
    if m.kind in (Kind.SSVR, Kind.CIBERSORT):
        return bool(np.all(beta >= -tol) and abs(beta.sum() - 1.0) <= tol)
    if m.kind is Kind.ISVR:
        steps = np.diff(beta)
        return bool(np.all(-steps <= tol) if not decreasing else np.all(steps <= tol))
    return True


def format_model(m: FittedModel) -> str:
    hp = m.hyperparameters
    out = io.StringIO()
    out.write("[meta]\n")
    out.write(f"kind={m.kind.value}\nC={hp.C!r}\nnu={hp.nu!r}\ntau={hp.tau!r}\n")
    out.write("[beta]\n")
    for v in m.beta:
        out.write(f"{float(v)!r}\n")
    out.write(f"[intercept]\n{float(m.beta0)!r}\n")
    out.write(f"[epsilon]\n{float(m.epsilon)!r}\n")
    return out.getvalue()


class ModelFormatError(ValueError):
    pass


def parse_model(text: str) -> FittedModel:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise ModelFormatError(f"content before first section: {line!r}")
        else:
            sections[current].append(line)
    for name in ("meta", "beta", "intercept", "epsilon"):
        if name not in sections:
            raise ModelFormatError(f"missing section [{name}]")
    meta = dict(line.split("=", 1) for line in sections["meta"])
    try:
        hp = Hyperparameters(C=float(meta["C"]), nu=float(meta["nu"]), tau=float(meta["tau"]))
        kind = Kind(meta["kind"])
        beta = np.array([float(v) for v in sections["beta"]])
        beta0 = float(sections["intercept"][0])
        eps = float(sections["epsilon"][0])
    except (KeyError, ValueError, IndexError) as exc:
        raise ModelFormatError(str(exc)) from exc
    sol = PrimalSolution(beta, beta0, eps, np.zeros(0, dtype=bool))
    return FittedModel(sol, kind, hp)


def save_model(m: FittedModel, path) -> None:
    Path(path).write_text(format_model(m))


def load_model(path) -> FittedModel:
    return parse_model(Path(path).read_text())
