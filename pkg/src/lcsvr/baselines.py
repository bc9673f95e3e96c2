"""Reference solvers: an exact active-set oracle for the dual, non-negative and
simplex-constrained least squares, and isotonic regression by pooling
adjacent violators.

The oracle is deliberately independent of the SMO code path: it fixes a
pattern of tight bounds, solves the resulting equality-constrained KKT
system with a dense least-squares solve, and accepts the point only if an
optimality certificate (feasibility, stationarity, multiplier signs)
validates. Small instances are enumerated exhaustively; larger ones take
the pattern suggested by an interior-point solve (cvxopt) and enumerate only
the coordinates whose status is numerically ambiguous.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dual import DualProblem, gradient_full, objective, qbar_dense

LOWER, FREE, UPPER = 0, 1, 2


class InstanceTooLarge(ValueError):
    pass


class NoFeasiblePoint(RuntimeError):
    pass


@dataclass(frozen=True)
class ActiveSetCertificate:
    """Optimality certificate of a dual point.

    ``pattern`` holds LOWER / FREE / UPPER per coordinate (mu is always FREE).
    ``min_multiplier`` is the smallest sign-constrained multiplier of a tight
    bound (should be >= 0) and ``stationarity`` the largest gradient mismatch
    on free coordinates.
    """

    pattern: tuple[int, ...]
    min_multiplier: float
    stationarity: float
    feasibility: float
    objective: float
    scale: float

    @property
    def valid(self) -> bool:
        return (self.min_multiplier >= -1e-9 * self.scale
                and self.stationarity <= 1e-8 * self.scale
                and self.feasibility <= 1e-10 * self.scale)


@dataclass(frozen=True)
class OracleResult:
    theta: np.ndarray
    objective: float
    certificate: ActiveSetCertificate
    beta: np.ndarray


def _block_multipliers(vals, grad, pattern, ub):
    """Common level of a pair block plus its multiplier signs and stationarity."""
    free = pattern == FREE
    lo_mask = pattern == LOWER
    up_mask = pattern == UPPER
    if free.any():
        level = float(grad[free].mean())
        stat = float(np.max(np.abs(grad[free] - level)))
    else:
        # any level in [max grad over upper, min grad over lower] works
        lo = float(np.max(grad[up_mask], initial=-np.inf))
        hi = float(np.min(grad[lo_mask], initial=np.inf))
        level = lo if not np.isfinite(hi) else hi if not np.isfinite(lo) else 0.5 * (lo + hi)
        stat = 0.0
    mult = np.concatenate([grad[lo_mask] - level, level - grad[up_mask]])
    return float(np.min(mult, initial=np.inf)), stat


def _scale(dp: DualProblem) -> float:
    return max(1.0, float(np.max(np.abs(dp.l), initial=0.0)), float(np.max(dp.diag, initial=0.0)))


def certify(dp: DualProblem, theta, pattern=None) -> ActiveSetCertificate:
    """Build the optimality certificate of ``theta`` from a fresh gradient."""
    lay = dp.layout
    theta = np.asarray(theta, dtype=float)
    if pattern is None:
        pattern = classify(dp, theta)
    pattern = np.asarray(pattern)
    g = gradient_full(dp, theta)
    ub = dp.upper
    m1, s1 = _block_multipliers(theta[lay.alpha], g[lay.alpha], pattern[lay.alpha], ub)
    m2, s2 = _block_multipliers(theta[lay.alpha_star], g[lay.alpha_star], pattern[lay.alpha_star], ub)
    pg, gg = pattern[lay.gamma], g[lay.gamma]
    m3 = float(np.min(gg[pg == LOWER], initial=np.inf))
    s3 = float(np.max(np.abs(gg[pg == FREE]), initial=0.0))
    s4 = float(np.max(np.abs(g[lay.mu]), initial=0.0))

    a, s = theta[lay.alpha], theta[lay.alpha_star]
    ab = np.concatenate([a, s])
    feas = max(
        float(np.max(-ab, initial=0.0)),
        float(np.max(ab - ub, initial=0.0)),
        float(np.max(-theta[lay.gamma], initial=0.0)),
        abs(float(a.sum() - s.sum())),
        abs(float(a.sum() + s.sum() - dp.nu_sum)),
    )
    return ActiveSetCertificate(
        pattern=tuple(int(v) for v in pattern),
        min_multiplier=min(m1, m2, m3),
        stationarity=max(s1, s2, s3, s4),
        feasibility=feas,
        objective=objective(dp, theta),
        scale=_scale(dp),
    )


def classify(dp: DualProblem, theta, rel: float = 0.0) -> np.ndarray:
    """Bound status of each coordinate, with a tolerance ``rel * C/n``."""
    lay = dp.layout
    theta = np.asarray(theta, dtype=float)
    ub = dp.upper
    tol = rel * ub
    pat = np.full(lay.total, FREE)
    ab = theta[: 2 * lay.n]
    pat[: 2 * lay.n][ab <= tol] = LOWER
    pat[: 2 * lay.n][ab >= ub - tol] = UPPER
    pat[lay.gamma][theta[lay.gamma] <= tol] = LOWER
    return pat


def _equality_rows(dp: DualProblem) -> tuple[np.ndarray, np.ndarray]:
    n, total = dp.layout.n, dp.layout.total
    E = np.zeros((2, total))
    E[0, :n], E[0, n:2 * n] = 1.0, -1.0
    E[1, : 2 * n] = 1.0
    return E, np.array([0.0, dp.nu_sum])


def _solve_pattern(dp: DualProblem, Q: np.ndarray, pattern: np.ndarray, anchor: np.ndarray):
    """Stationary point of the face given by ``pattern``, closest to ``anchor``.

    Returns ``None`` when the face has no stationary point satisfying the equalities.
    """
    ub = dp.upper
    E, c = _equality_rows(dp)
    theta = np.where(pattern == UPPER, ub, 0.0).astype(float)
    F = np.flatnonzero(pattern == FREE)
    nf = F.size
    K = np.zeros((nf + 2, nf + 2))
    K[:nf, :nf] = Q[np.ix_(F, F)]
    K[:nf, nf:] = -E[:, F].T
    K[nf:, :nf] = E[:, F]
    B = np.flatnonzero(pattern != FREE)
    rhs = np.concatenate([-(Q[np.ix_(F, B)] @ theta[B]) - dp.l[F], c - E[:, B] @ theta[B]])
    z0 = np.concatenate([anchor[F], np.zeros(2)])
    dz = np.linalg.lstsq(K, rhs - K @ z0, rcond=None)[0]
    z = z0 + dz
    # the two multiplier rows are only needed for consistency of the primal part
    resid = K @ z - rhs
    scale = _scale(dp)
    if np.max(np.abs(resid[nf:]), initial=0.0) > 1e-10 * scale:
        return None
    if np.max(np.abs(resid[:nf]), initial=0.0) > 1e-8 * scale:
        return None
    theta[F] = z[:nf]
    return theta


def _snap(dp: DualProblem, theta, pattern):
    lay = dp.layout
    ub = dp.upper
    tol = 1e-12 * max(ub, 1.0)
    ab = theta[: 2 * lay.n]
    bad = (ab < -tol) | (ab > ub + tol)
    if bad.any() or np.any(theta[lay.gamma] < -tol):
        return None
    theta = theta.copy()
    theta[: 2 * lay.n] = np.clip(ab, 0.0, ub)
    theta[lay.gamma] = np.maximum(theta[lay.gamma], 0.0)
    return theta


def _pattern_space(dp: DualProblem):
    lay = dp.layout
    choices = [(LOWER, FREE, UPPER)] * (2 * lay.n) + [(LOWER, FREE)] * lay.k1 + [(FREE,)] * lay.k2
    return choices


def _pattern_count(dp: DualProblem) -> int:
    lay = dp.layout
    return 3 ** (2 * lay.n) * 2 ** lay.k1


def _interior_point_seed(dp: DualProblem, Q: np.ndarray):
    from cvxopt import matrix, solvers

    lay = dp.layout
    T, n = lay.total, lay.n
    rows, h = [], []
    for k in range(2 * n):
        rows.append((k, -1.0)); h.append(0.0)
        rows.append((k, 1.0)); h.append(dp.upper)
    for k in range(lay.gamma.start, lay.gamma.stop):
        rows.append((k, -1.0)); h.append(0.0)
    G = np.zeros((len(rows), T))
    for r, (k, s) in enumerate(rows):
        G[r, k] = s
    E, c = _equality_rows(dp)
    opts = {"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12, "maxiters": 200}
    sol = solvers.qp(matrix(Q), matrix(dp.l.copy()), matrix(G), matrix(np.array(h)),
                     matrix(E), matrix(c), options=opts)
    if sol["x"] is None:
        return None
    return np.array(sol["x"]).ravel()


def oracle_solve_dual(dp: DualProblem, max_total: int = 24, enumerate_limit: int = 6000,
                      max_ambiguous: int = 12) -> OracleResult:
    """Exact solution of the dual by active-set enumeration.

    Raises
    ------
    InstanceTooLarge
        If ``2n + k1 + k2 > max_total``.
    NoFeasiblePoint
        If no candidate face yields a certified optimum.
    """
    lay = dp.layout
    if lay.total > max_total:
        raise InstanceTooLarge(f"oracle handles total <= {max_total}, got {lay.total}")
    Q = qbar_dense(dp)

    if _pattern_count(dp) <= enumerate_limit:
        anchor = np.full(lay.total, 0.5 * dp.upper)
        anchor[2 * lay.n:] = 0.0
        best = None
        for pat in itertools.product(*_pattern_space(dp)):
            pat = np.array(pat)
            res = _try(dp, Q, pat, anchor)
            if res is not None and (best is None or res.objective < best.objective):
                best = res
        if best is None:
            raise NoFeasiblePoint("no certified active set")
        return best

    seed = _interior_point_seed(dp, Q)
    if seed is None:
        raise NoFeasiblePoint("interior-point seed failed")
    ub = dp.upper
    base = classify(dp, seed, rel=1e-6)
    dist = np.full(lay.total, np.inf)
    dist[: 2 * lay.n] = np.minimum(seed[: 2 * lay.n], ub - seed[: 2 * lay.n]) / ub
    dist[lay.gamma] = np.abs(seed[lay.gamma]) / max(ub, 1.0)
    amb = np.flatnonzero((dist > 1e-11) & (dist < 1e-3))
    amb = amb[np.argsort(np.abs(np.log10(dist[amb]) + 6.0))][:max_ambiguous]
    alt = base.copy()
    for k in amb:
        if base[k] == FREE:
            alt[k] = LOWER if (k >= 2 * lay.n or seed[k] < 0.5 * ub) else UPPER
        else:
            alt[k] = FREE
    for r in range(len(amb) + 1):
        for flip in itertools.combinations(amb, r):
            pat = base.copy()
            pat[list(flip)] = alt[list(flip)]
            res = _try(dp, Q, pat, seed)
            if res is not None:
                return res
    raise NoFeasiblePoint("no certified active set near the interior-point seed")


def _try(dp: DualProblem, Q, pat, anchor):
    theta = _solve_pattern(dp, Q, pat, anchor)
    if theta is None:
        return None
    theta = _snap(dp, theta, pat)
    if theta is None:
        return None
    cert = certify(dp, theta, pat)
    if not cert.valid:
        return None
    return OracleResult(theta, cert.objective, cert, -(dp.M.T @ theta))


# -- least-squares baselines -------------------------------------------------

def _active_set_lsq(X, y, simplex: bool, max_iter: int | None = None) -> np.ndarray:
    """Primal active-set method for ``min 1/2 ||X b - y||^2`` s.t. ``b >= 0``
    (and ``sum(b) = 1`` if ``simplex``)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    max_iter = 30 * p + 50 if max_iter is None else max_iter
    G = X.T @ X
    Xty = X.T @ y
    scale = max(1.0, float(np.abs(G).max(initial=0.0)), float(np.abs(Xty).max(initial=0.0)))
    tol = 1e-12 * scale

    if simplex:
        k0 = int(np.argmin(np.sum((X - y[:, None]) ** 2, axis=0)))
        beta = np.zeros(p)
        beta[k0] = 1.0
        free = np.zeros(p, dtype=bool)
        free[k0] = True
    else:
        beta = np.zeros(p)
        free = np.zeros(p, dtype=bool)

    for _ in range(max_iter):
        F = np.flatnonzero(free)
        z = _eqp(G, Xty, F, simplex)
        step = z - beta[F]
        if np.max(np.abs(step), initial=0.0) <= 1e-13 * max(1.0, np.max(np.abs(beta), initial=0.0)):
            grad = G @ beta - Xty
            lam = -grad[F].mean() if (simplex and F.size) else 0.0
            mult = grad + lam
            mult[free] = np.inf
            k = int(np.argmin(mult))
            if mult[k] >= -tol:
                return beta
            free[k] = True
            continue
        neg = step < 0
        ratio = 1.0
        block = -1
        if neg.any():
            r = -beta[F][neg] / step[neg]
            m = int(np.argmin(r))
            if r[m] < 1.0:
                ratio, block = float(r[m]), int(F[neg][m])
        beta[F] += ratio * step
        if block >= 0:
            beta[block] = 0.0
            free[block] = False
        beta[~free] = 0.0
    raise RuntimeError("active-set least squares hit its iteration cap")


def _eqp(G, Xty, F, simplex):
    nf = F.size
    if nf == 0:
        return np.zeros(0)
    if not simplex:
        return np.linalg.lstsq(G[np.ix_(F, F)], Xty[F], rcond=None)[0]
    K = np.zeros((nf + 1, nf + 1))
    K[:nf, :nf] = G[np.ix_(F, F)]
    K[:nf, nf] = 1.0
    K[nf, :nf] = 1.0
    rhs = np.concatenate([Xty[F], [1.0]])
    return np.linalg.lstsq(K, rhs, rcond=None)[0][:nf]


def nnls(X, y) -> np.ndarray:
    """Non-negative least squares (Lawson-Hanson style active set)."""
    return _active_set_lsq(X, y, simplex=False)


def sols(X, y) -> np.ndarray:
    """Least squares over the probability simplex."""
    return _active_set_lsq(X, y, simplex=True)


def lsq_kkt_residual(X, y, beta, simplex: bool = False) -> float:
    """Largest KKT violation of a (simplex-)non-negative least-squares point."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    grad = X.T @ (X @ beta - np.asarray(y, dtype=float))
    free = beta > 0
    lam = -grad[free].mean() if (simplex and free.any()) else 0.0
    g = grad + lam
    viol = [float(np.max(np.abs(g[free]), initial=0.0)),
            float(np.max(-g[~free], initial=0.0)),
            float(np.max(-beta, initial=0.0))]
    if simplex:
        viol.append(abs(float(beta.sum()) - 1.0))
    return max(viol)


def pava_isotonic(y, w=None) -> np.ndarray:
    """Non-decreasing least-squares fit by pooling adjacent violators."""
    y = np.asarray(y, dtype=float).ravel()
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float).ravel()
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), weights.pop(), sizes.pop()
            m1, w1, s1 = means.pop(), weights.pop(), sizes.pop()
            wt = w1 + w2
            means.append((w1 * m1 + w2 * m2) / wt)
            weights.append(wt)
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)
