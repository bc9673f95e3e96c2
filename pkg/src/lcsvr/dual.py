"""The dual of the linearly constrained nu-SVR.

The dual variable is the stacked vector ``theta = [alpha; alpha*; gamma; mu]``
of length ``2n + k1 + k2``. Its Hessian is the Gram matrix ``Qbar = M M^T`` of
the stacked rows ``M = [X; -X; A; -Gamma]`` and its linear term is
``l = [y; -y; b; -d]``, so that

    f(theta) = 1/2 ||M^T theta||^2 + l^T theta,   beta(theta) = -M^T theta.

``Qbar`` is never formed; entries and columns are computed from ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .problem import Hyperparameters, LinearConstraints, TrainingSet


@dataclass(frozen=True)
class ThetaLayout:
    n: int
    k1: int
    k2: int

    @property
    def total(self) -> int:
        return 2 * self.n + self.k1 + self.k2

    @property
    def alpha(self) -> slice:
        return slice(0, self.n)

    @property
    def alpha_star(self) -> slice:
        return slice(self.n, 2 * self.n)

    @property
    def gamma(self) -> slice:
        return slice(2 * self.n, 2 * self.n + self.k1)

    @property
    def mu(self) -> slice:
        return slice(2 * self.n + self.k1, self.total)

    def blocks(self) -> tuple[slice, slice, slice, slice]:
        return self.alpha, self.alpha_star, self.gamma, self.mu


class DualProblem:
    """Immutable view of one constrained nu-SVR dual instance."""

    def __init__(self, ts: TrainingSet, lc: LinearConstraints, hp: Hyperparameters):
        self.ts = ts
        self.lc = lc
        self.hp = hp
        self.layout = ThetaLayout(ts.n, lc.k1, lc.k2)
        M = np.vstack([ts.X, -ts.X, lc.A, -lc.Gamma])
        l = np.concatenate([ts.y, -ts.y, lc.b, -lc.d])
        diag = np.einsum("ij,ij->i", M, M)
        for a in (M, l, diag):
            a.setflags(write=False)
        self.M = M
        self.l = l
        self.diag = diag

    @property
    def upper(self) -> float:
        """Box bound ``C/n`` on every alpha and alpha* coordinate."""
        return self.hp.C / self.ts.n

    @property
    def nu_sum(self) -> float:
        """Required value of ``sum(alpha + alpha*)``."""
        return self.hp.C * self.hp.nu

    def max_iter(self) -> int:
        if self.hp.max_iter is None:
            return 100 * self.layout.total
        return int(self.hp.max_iter)


@dataclass
class DualState:
    """Mutable solver state: iterate, maintained gradient and objective."""

    theta: np.ndarray
    grad: np.ndarray
    objective: float

    def copy(self) -> "DualState":
        return DualState(self.theta.copy(), self.grad.copy(), self.objective)


def qbar_entry(dp: DualProblem, i: int, j: int) -> float:
    return float(dp.M[i] @ dp.M[j])


def qbar_column(dp: DualProblem, j: int, out: np.ndarray | None = None) -> np.ndarray:
    """Column ``j`` of ``Qbar``, written into ``out`` when given."""
    col = dp.M @ dp.M[j]
    if out is None:
        return col
    out[:] = col
    return out


def qbar_dense(dp: DualProblem) -> np.ndarray:
    """Materialized ``Qbar``; for tests and the small-instance oracle only."""
    return dp.M @ dp.M.T


def recover_beta(dp: DualProblem, theta) -> np.ndarray:
    """Primal coefficients ``-sum (a_i - a*_i) X_i - A^T gamma + Gamma^T mu``."""
    return -(dp.M.T @ np.asarray(theta, dtype=float))


def objective(dp: DualProblem, theta) -> float:
    """``1/2 theta^T Qbar theta + l^T theta`` evaluated as ``1/2 ||beta||^2 + l^T theta``."""
    theta = np.asarray(theta, dtype=float)
    beta = recover_beta(dp, theta)
    return float(0.5 * beta @ beta + dp.l @ theta)


def gradient_full(dp: DualProblem, theta) -> np.ndarray:
    """``Qbar theta + l`` from scratch."""
    theta = np.asarray(theta, dtype=float)
    return dp.M @ (dp.M.T @ theta) + dp.l


def state_from_theta(dp: DualProblem, theta) -> DualState:
    theta = np.array(theta, dtype=float)
    return DualState(theta, gradient_full(dp, theta), objective(dp, theta))


def feasibility_violation(dp: DualProblem, theta) -> dict[str, float]:
    """Largest violation of each dual constraint family (0 means satisfied).

    ``box`` and ``gamma`` are exact comparisons against the bounds; the two
    equality residuals are absolute.
    """
    lay = dp.layout
    theta = np.asarray(theta, dtype=float)
    a, s = theta[lay.alpha], theta[lay.alpha_star]
    ab = np.concatenate([a, s])
    box = max(0.0, float(np.max(-ab, initial=0.0)), float(np.max(ab - dp.upper, initial=0.0)))
    gam = float(np.max(-theta[lay.gamma], initial=0.0))
    return {
        "box": box,
        "gamma": gam,
        "balance": abs(float(a.sum() - s.sum())),
        "nu_sum": abs(float(a.sum() + s.sum() - dp.nu_sum)),
    }


class InterceptEstimate(NamedTuple):
    beta0: float
    epsilon: float
    degenerate: bool


def recover_intercept_epsilon(dp: DualProblem, theta, beta=None) -> InterceptEstimate:
    """Recover the intercept and tube half-width from an (approximately) optimal dual point.

    With residuals ``r_i = y_i - beta^T X_i``, a free ``alpha_i`` pins
    ``beta0 - eps = r_i`` and a free ``alpha*_i`` pins ``beta0 + eps = r_i``.
    Each side uses the mean over its free indices. A side without free indices
    falls back to the midpoint of the interval allowed by its bounded indices.
    If neither side has a free index the estimate is flagged degenerate and
    ``beta0 = median(r)``, ``eps = 0``.
    """
    lay = dp.layout
    theta = np.asarray(theta, dtype=float)
    if beta is None:
        beta = recover_beta(dp, theta)
    r = dp.ts.y - dp.ts.X @ np.asarray(beta, dtype=float)
    a, s = theta[lay.alpha], theta[lay.alpha_star]
    ub = dp.upper
    free_a = (a > 0) & (a < ub)
    free_s = (s > 0) & (s < ub)
    if not free_a.any() and not free_s.any():
        return InterceptEstimate(float(np.median(r)), 0.0, True)

    def side(free, lower_mask, upper_mask):
        # value v must satisfy max(r[lower_mask]) <= v <= min(r[upper_mask])
        if free.any():
            return float(r[free].mean())
        lo = float(np.max(r[lower_mask], initial=-np.inf))
        hi = float(np.min(r[upper_mask], initial=np.inf))
        if np.isfinite(lo) and np.isfinite(hi):
            return 0.5 * (lo + hi)
        return lo if np.isfinite(lo) else hi

    # alpha side (beta0 - eps): alpha=C/n gives a lower bound, alpha=0 an upper one
    m_low = side(free_a, a >= ub, a <= 0)
    # alpha* side (beta0 + eps): alpha*=0 gives a lower bound, alpha*=C/n an upper one
    m_up = side(free_s, s <= 0, s >= ub)
    beta0 = 0.5 * (m_low + m_up)
    eps = max(0.5 * (m_up - m_low), 0.0)
    return InterceptEstimate(beta0, eps, False)
