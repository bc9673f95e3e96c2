"""Generalized SMO for the constrained nu-SVR dual.

Each iteration scores the four blocks of ``theta`` and updates the most
violating one:

* alpha / alpha*: a maximal violating pair ``(i, j)`` moves along
  ``alpha_i += t, alpha_j -= t`` which keeps both equality constraints, with
  ``t`` the clipped one-dimensional minimizer;
* gamma: one coordinate takes a Newton step clipped at zero;
* mu: one coordinate takes an exact Newton step.

The gradient is maintained incrementally from at most two ``Qbar`` columns per
iteration and recomputed from scratch every ``2n + k1 + k2`` iterations and
before declaring convergence.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from . import _kernel
from .dual import DualProblem, DualState, gradient_full, objective

NEG_INF = -math.inf

GammaRule = Literal["complementary", "literal"]


class ZeroCurvatureError(ArithmeticError):
    """Raised when a pair update has ``||X_i - X_j||^2 == 0`` (duplicate rows)."""


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    ITERATION_CAP = "IterationCap"


class Block(enum.IntEnum):
    ALPHA = 0
    ALPHA_STAR = 1
    GAMMA = 2
    MU = 3


@dataclass(frozen=True)
class ViolationScores:
    """Per-block violation scores with their witnesses (block-local indices).

    A score is ``-inf`` when its block is empty or has no eligible pair.
    """

    delta1: float
    delta2: float
    delta3: float
    delta4: float
    i: int = -1
    j: int = -1
    i_star: int = -1
    j_star: int = -1
    u_gamma: int = -1
    u_mu: int = -1

    @property
    def deltas(self) -> tuple[float, float, float, float]:
        return (self.delta1, self.delta2, self.delta3, self.delta4)

    @property
    def delta(self) -> float:
        return max(self.deltas)

    @property
    def block(self) -> Block:
        """Block of the largest score; ties go to the lowest block number."""
        d = self.deltas
        return Block(d.index(max(d)))


@dataclass
class SolveReport:
    iterations: int
    termination: Termination
    final_delta: float
    final_objective: float
    block_update_counts: list[int]
    trajectory: list[tuple[int, float, float]] | None = None
    drift_checks: list[float] = field(default_factory=list)
    diverging: bool = False

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED


@dataclass(frozen=True)
class IterationEvent:
    """Passed to the ``solve`` callback right after each update."""

    iteration: int
    block: Block
    indices: tuple[int, ...]
    scores: ViolationScores
    step: float
    objective_before: float
    state: DualState


def initialize(dp: DualProblem) -> DualState:
    """Symmetric feasible start ``alpha_i = alpha*_i = C nu / (2n)``, ``gamma = mu = 0``."""
    lay = dp.layout
    theta = np.zeros(lay.total)
    theta[: 2 * lay.n] = dp.nu_sum / (2 * lay.n)
    return DualState(theta, gradient_full(dp, theta), objective(dp, theta))


def _pair_scores(vals: np.ndarray, grad: np.ndarray, upper: float) -> tuple[float, int, int]:
    g_up = np.where(vals < upper, grad, np.inf)
    g_low = np.where(vals > 0, grad, -np.inf)
    i = int(np.argmin(g_up))
    j = int(np.argmax(g_low))
    if g_up[i] == np.inf or g_low[j] == -np.inf:
        return NEG_INF, -1, -1
    return float(g_low[j] - g_up[i]), i, j


def compute_scores(dp: DualProblem, ds: DualState, gamma_rule: GammaRule = "complementary") -> ViolationScores:
    """Score the four blocks from the maintained gradient.

    With ``gamma_rule="literal"`` the gamma score is ``-min_j grad_gamma_j``
    only. The default ``"complementary"`` also counts a positive gradient on a
    strictly positive ``gamma_j`` (an inactive constraint carrying a nonzero
    multiplier), scored as ``|grad_gamma_j|``.
    """
    lay = dp.layout
    th, g = ds.theta, ds.grad
    ub = dp.upper
    d1, i, j = _pair_scores(th[lay.alpha], g[lay.alpha], ub)
    d2, i_s, j_s = _pair_scores(th[lay.alpha_star], g[lay.alpha_star], ub)

    d3, u_g = NEG_INF, -1
    if lay.k1:
        gg = g[lay.gamma]
        if gamma_rule == "literal":
            s = -gg
        else:
            s = np.where(th[lay.gamma] > 0, np.abs(gg), -gg)
        u_g = int(np.argmax(s))
        d3 = float(s[u_g])

    d4, u_m = NEG_INF, -1
    if lay.k2:
        gm = np.abs(g[lay.mu])
        u_m = int(np.argmax(gm))
        d4 = float(gm[u_m])

    return ViolationScores(d1, d2, d3, d4, i, j, i_s, j_s, u_g, u_m)


def alpha_pair_update(dp: DualProblem, ds: DualState, i: int, j: int, starred: bool = False) -> float:
    """Move ``theta_i += t``, ``theta_j -= t`` inside the alpha (or alpha*) block.

    ``i`` and ``j`` are sample indices. Returns the clipped step ``t``.
    Raises ``ValueError`` if the step is zero (the pair is not violating).
    """
    off = dp.layout.n if starred else 0
    ki, kj = off + i, off + j
    th, g = ds.theta, ds.grad
    ub = dp.upper
    diff = dp.ts.X[i] - dp.ts.X[j]
    denom = float(diff @ diff)
    if denom == 0.0:
        raise ZeroCurvatureError(f"rows {i} and {j} of X are identical")
    ai, aj = th[ki], th[kj]
    gdiff = g[ki] - g[kj]
    t_q = -gdiff / denom
    lo = max(-ai, aj - ub)
    hi = min(aj, ub - ai)
    t = min(max(lo, t_q), hi)
    if t == 0.0:
        raise ValueError(f"pair ({i}, {j}) gives a zero step; it is not a violating pair")

    new_i, new_j = ai + t, aj - t
    # clipped steps land exactly on the bound they hit
    if t == hi:
        if hi == aj:
            new_j = 0.0
        else:
            new_i = ub
    elif t == lo:
        if lo == -ai:
            new_i = 0.0
        else:
            new_j = ub
    th[ki], th[kj] = new_i, new_j
    g += t * (dp.M @ (dp.M[ki] - dp.M[kj]))
    ds.objective += t * (0.5 * t * denom + gdiff)
    return float(t)


def _coordinate_update(dp: DualProblem, ds: DualState, k: int, clip_at_zero: bool) -> float:
    q = dp.diag[k]
    old = ds.theta[k]
    gk = ds.grad[k]
    new = old - gk / q
    if clip_at_zero and new < 0.0:
        new = 0.0
    step = new - old
    if step == 0.0:
        raise ValueError(f"coordinate {k} is not violating; the update is a no-op")
    ds.theta[k] = new
    ds.grad += step * (dp.M @ dp.M[k])
    ds.objective += step * (gk + 0.5 * q * step)
    return float(new)


def gamma_update(dp: DualProblem, ds: DualState, u: int) -> float:
    """``gamma_u <- max(gamma_u - grad_u / (AA^T)_uu, 0)``; returns the new value."""
    return _coordinate_update(dp, ds, dp.layout.gamma.start + u, clip_at_zero=True)


def mu_update(dp: DualProblem, ds: DualState, u: int) -> float:
    """``mu_u <- mu_u - grad_u / (Gamma Gamma^T)_uu``; returns the new value."""
    return _coordinate_update(dp, ds, dp.layout.mu.start + u, clip_at_zero=False)


def apply_update(dp: DualProblem, ds: DualState, sc: ViolationScores) -> tuple[Block, tuple[int, ...], float]:
    """Dispatch the update of the block selected by ``sc``."""
    block = sc.block
    if block is Block.ALPHA:
        idx = (sc.i, sc.j)
        step = alpha_pair_update(dp, ds, sc.i, sc.j)
    elif block is Block.ALPHA_STAR:
        idx = (sc.i_star, sc.j_star)
        step = alpha_pair_update(dp, ds, sc.i_star, sc.j_star, starred=True)
    elif block is Block.GAMMA:
        idx = (sc.u_gamma,)
        step = gamma_update(dp, ds, sc.u_gamma)
    else:
        idx = (sc.u_mu,)
        step = mu_update(dp, ds, sc.u_mu)
    return block, idx, step


def _refresh(dp: DualProblem, ds: DualState) -> float:
    fresh = gradient_full(dp, ds.theta)
    scale = max(1.0, float(np.max(np.abs(fresh), initial=0.0)))
    drift = float(np.max(np.abs(ds.grad - fresh), initial=0.0)) / scale
    ds.grad = fresh
    return drift


def solve(
    dp: DualProblem,
    record_trajectory: bool = False,
    *,
    state: DualState | None = None,
    gamma_rule: GammaRule = "complementary",
    callback: Callable[[IterationEvent], None] | None = None,
    engine: Literal["auto", "python", "compiled"] = "auto",
) -> tuple[DualState, SolveReport]:
    """Run generalized SMO until every block score is at most ``tau``.

    Parameters
    ----------
    dp : DualProblem
        A validated problem.
    record_trajectory : bool
        Keep ``(iteration, objective, delta)`` for every visited iterate,
        including the starting point and the final one.
    state : DualState, optional
        Feasible warm start; defaults to :func:`initialize`. Modified in place.
    gamma_rule : {"complementary", "literal"}
        Gamma-block scoring, see :func:`compute_scores`.
    callback : callable, optional
        Receives an :class:`IterationEvent` after every update.
    engine : {"auto", "python", "compiled"}
        ``"auto"`` uses the compiled loop when numba is available and no
        callback is given. Both engines visit the same iterates up to
        floating-point summation order.

    Returns
    -------
    (DualState, SolveReport)
        Hitting ``max_iter`` is reported as ``Termination.ITERATION_CAP``, not raised.
    """
    if gamma_rule not in ("complementary", "literal"):
        raise ValueError(f"unknown gamma_rule {gamma_rule!r}")
    ds = initialize(dp) if state is None else state
    if engine == "compiled" or (engine == "auto" and callback is None and _kernel.AVAILABLE):
        if callback is not None:
            raise ValueError("the compiled engine does not support callbacks")
        return _solve_compiled(dp, ds, record_trajectory, gamma_rule)
    tau = dp.hp.tau
    max_iter = dp.max_iter()
    period = dp.layout.total
    lay = dp.layout
    counts = [0, 0, 0, 0]
    traj: list[tuple[int, float, float]] | None = [] if record_trajectory else None
    drifts: list[float] = []
    mult_norms: list[float] = []
    it = 0
    termination = Termination.ITERATION_CAP

    while True:
        sc = compute_scores(dp, ds, gamma_rule)
        if sc.delta <= tau:
            # never stop on an incrementally maintained gradient alone
            drifts.append(_refresh(dp, ds))
            sc = compute_scores(dp, ds, gamma_rule)
            if sc.delta <= tau:
                termination = Termination.CONVERGED
        if traj is not None:
            traj.append((it, ds.objective, sc.delta))
        if termination is Termination.CONVERGED or it >= max_iter:
            break

        f_before = ds.objective
        block, idx, step = apply_update(dp, ds, sc)
        counts[block] += 1
        it += 1
        if callback is not None:
            callback(IterationEvent(it, block, idx, sc, step, f_before, ds))
        if it % period == 0:
            drifts.append(_refresh(dp, ds))
            mult_norms.append(float(np.linalg.norm(ds.theta[2 * lay.n:])))

    report = SolveReport(
        iterations=it,
        termination=termination,
        final_delta=sc.delta,
        final_objective=objective(dp, ds.theta),
        block_update_counts=counts,
        trajectory=traj,
        drift_checks=drifts,
        diverging=_diverging(termination, mult_norms),
    )
    return ds, report


def _diverging(termination: Termination, mult_norms) -> bool:
    """Heuristic flag: multiplier norms keep growing when the cap is hit."""
    m = list(mult_norms)
    return (
        termination is Termination.ITERATION_CAP
        and len(m) >= 4
        and all(b > a for a, b in zip(m[-4:], m[-3:]))
        and m[-1] > 1.5 * m[len(m) // 2] + 1.0
    )


def _solve_compiled(dp: DualProblem, ds: DualState, record: bool, gamma_rule: GammaRule):
    lay = dp.layout
    max_iter = dp.max_iter()
    theta = np.array(ds.theta, dtype=float)
    grad = np.array(ds.grad, dtype=float)
    out = _kernel.run(dp.M, dp.l, dp.diag, theta, grad, float(ds.objective), lay.n, lay.k1,
                      lay.k2, dp.upper, dp.hp.tau, max_iter, lay.total,
                      gamma_rule == "literal", record)
    ds.theta, ds.grad, ds.objective = theta, grad, out["objective"]
    i, j = out["err"]
    if out["status"] == _kernel.ZERO_CURVATURE:
        raise ZeroCurvatureError(f"rows {i} and {j} of X are identical")
    if out["status"] == _kernel.ZERO_STEP:
        raise ValueError("selected update is a no-op; the problem is numerically degenerate")
    termination = Termination.CONVERGED if out["converged"] else Termination.ITERATION_CAP
    traj = None
    if record:
        traj = [(int(a), float(b), float(c)) for a, b, c in out["trajectory"]]
    report = SolveReport(
        iterations=out["iterations"],
        termination=termination,
        final_delta=out["delta"],
        final_objective=objective(dp, ds.theta),
        block_update_counts=out["counts"],
        trajectory=traj,
        drift_checks=[float(d) for d in out["drifts"]],
        diverging=_diverging(termination, out["mult_norms"]),
    )
    return ds, report
