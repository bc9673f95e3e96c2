"""Compiled generalized-SMO loop.

Mirrors :func:`lcsvr.solver.solve` step for step (same scores, tie-breaking,
clipping, refresh schedule and trajectory points) without the per-iteration
callback. Used automatically when numba is importable and no callback is given.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

OK, ZERO_CURVATURE, ZERO_STEP = 0, 1, 2


def _loop(M, l, diag, theta, grad, obj, n, k1, k2, ub, tau, max_iter, period,
          literal_gamma, record, traj, drifts, mult_norms, counts):
    total = 2 * n + k1 + k2
    p = M.shape[1]
    v = np.empty(p)
    it = 0
    n_traj = 0
    n_drift = 0
    n_mult = 0
    converged = False
    delta = 0.0
    status = OK
    err_i = -1
    err_j = -1
    while True:
        for rescore in range(2):
            # scores of the four blocks
            best = -math.inf
            block = -1
            bi = -1
            bj = -1
            for b in range(2):
                off = b * n
                gi = math.inf
                gj = -math.inf
                ii = -1
                jj = -1
                for k in range(n):
                    a = theta[off + k]
                    g = grad[off + k]
                    if a < ub and g < gi:
                        gi = g
                        ii = k
                    if a > 0.0 and g > gj:
                        gj = g
                        jj = k
                if ii >= 0 and jj >= 0:
                    d = gj - gi
                    if d > best:
                        best = d
                        block = b
                        bi = ii
                        bj = jj
            if k1 > 0:
                s_best = -math.inf
                u = -1
                for k in range(k1):
                    g = grad[2 * n + k]
                    if literal_gamma:
                        s = -g
                    elif theta[2 * n + k] > 0.0:
                        s = abs(g)
                    else:
                        s = -g
                    if s > s_best:
                        s_best = s
                        u = k
                if s_best > best:
                    best = s_best
                    block = 2
                    bi = u
            if k2 > 0:
                s_best = -math.inf
                u = -1
                for k in range(k2):
                    s = abs(grad[2 * n + k1 + k])
                    if s > s_best:
                        s_best = s
                        u = k
                if s_best > best:
                    best = s_best
                    block = 3
                    bi = u
            delta = best
            if rescore == 1 or delta > tau:
                break
            # never stop on an incrementally maintained gradient alone
            drifts[n_drift] = _refresh(M, l, theta, grad)
            n_drift += 1
        if delta <= tau:
            converged = True
        if record:
            traj[n_traj, 0] = it
            traj[n_traj, 1] = obj
            traj[n_traj, 2] = delta
            n_traj += 1
        if converged or it >= max_iter:
            break

        if block <= 1:
            off = block * n
            ki = off + bi
            kj = off + bj
            denom = 0.0
            for c in range(p):
                v[c] = M[ki, c] - M[kj, c]
                denom += v[c] * v[c]
            if denom == 0.0:
                status = ZERO_CURVATURE
                err_i = bi
                err_j = bj
                break
            ai = theta[ki]
            aj = theta[kj]
            gdiff = grad[ki] - grad[kj]
            t_q = -gdiff / denom
            lo = max(-ai, aj - ub)
            hi = min(aj, ub - ai)
            t = min(max(lo, t_q), hi)
            if t == 0.0:
                status = ZERO_STEP
                err_i = bi
                err_j = bj
                break
            new_i = ai + t
            new_j = aj - t
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
            theta[ki] = new_i
            theta[kj] = new_j
            for r in range(total):
                acc = 0.0
                for c in range(p):
                    acc += M[r, c] * v[c]
                grad[r] += t * acc
            obj += t * (0.5 * t * denom + gdiff)
        else:
            k = 2 * n + bi if block == 2 else 2 * n + k1 + bi
            q = diag[k]
            old = theta[k]
            gk = grad[k]
            new = old - gk / q
            if block == 2 and new < 0.0:
                new = 0.0
            step = new - old
            if step == 0.0:
                status = ZERO_STEP
                err_i = bi
                break
            theta[k] = new
            for r in range(total):
                acc = 0.0
                for c in range(p):
                    acc += M[r, c] * M[k, c]
                grad[r] += step * acc
            obj += step * (gk + 0.5 * q * step)
        counts[block] += 1
        it += 1
        if it % period == 0:
            drifts[n_drift] = _refresh(M, l, theta, grad)
            n_drift += 1
            sq = 0.0
            for k in range(2 * n, total):
                sq += theta[k] * theta[k]
            mult_norms[n_mult] = math.sqrt(sq)
            n_mult += 1
    return it, obj, delta, converged, n_traj, n_drift, n_mult, status, err_i, err_j


def _refresh(M, l, theta, grad):
    total, p = M.shape
    beta = np.zeros(p)
    for r in range(total):
        t = theta[r]
        if t != 0.0:
            for c in range(p):
                beta[c] += M[r, c] * t
    worst = 0.0
    scale = 0.0
    for r in range(total):
        acc = l[r]
        for c in range(p):
            acc += M[r, c] * beta[c]
        worst = max(worst, abs(grad[r] - acc))
        scale = max(scale, abs(acc))
        grad[r] = acc
    return worst / max(1.0, scale)


if njit is not None:
    _refresh = njit(cache=True, nogil=True)(_refresh)
    _loop = njit(cache=True, nogil=True)(_loop)
    AVAILABLE = True
else:  # pragma: no cover
    AVAILABLE = False


def run(M, l, diag, theta, grad, obj, n, k1, k2, ub, tau, max_iter, period, literal_gamma, record):
    """Run the compiled loop in place on ``theta`` / ``grad``; returns a result dict."""
    traj = np.empty((max_iter + 1 if record else 1, 3))
    # one scheduled refresh per period plus one per convergence check
    drifts = np.empty(max_iter // period + max_iter + 2)
    mult_norms = np.empty(max_iter // period + 1)
    counts = np.zeros(4, dtype=np.int64)
    M = np.ascontiguousarray(M)
    it, obj, delta, conv, nt, nd, nm, status, ei, ej = _loop(
        M, l, diag, theta, grad, obj, n, k1, k2, ub, tau, max_iter, period,
        literal_gamma, record, traj, drifts, mult_norms, counts)
    return {
        "iterations": int(it),
        "objective": float(obj),
        "delta": float(delta),
        "converged": bool(conv),
        "trajectory": traj[:nt] if record else None,
        "drifts": drifts[:nd],
        "mult_norms": mult_norms[:nm],
        "counts": [int(c) for c in counts],
        "status": int(status),
        "err": (int(ei), int(ej)),
    }
