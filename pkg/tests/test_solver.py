import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcsvr.baselines import oracle_solve_dual
from lcsvr.dual import DualProblem, DualState, feasibility_violation, gradient_full, objective
from lcsvr.presets import make_constraints
from lcsvr.problem import Hyperparameters, LinearConstraints, TrainingSet
from lcsvr.solver import (
    Block,
    Termination,
    ZeroCurvatureError,
    alpha_pair_update,
    compute_scores,
    gamma_update,
    initialize,
    mu_update,
    solve,
)

from conftest import random_problem


def _dp(X, y, lc=None, C=1.0, nu=0.5, tau=1e-3, max_iter=None):
    ts = TrainingSet(X, y)
    lc = LinearConstraints.empty(ts.p) if lc is None else lc
    return DualProblem(ts, lc, Hyperparameters(C=C, nu=nu, tau=tau, max_iter=max_iter))


def test_initialize_symmetric_point():
    dp = _dp(np.arange(8.0).reshape(4, 2), np.arange(4.0))
    ds = initialize(dp)
    np.testing.assert_array_equal(ds.theta, np.full(8, 0.0625))
    assert 0.0625 <= dp.upper == 0.25
    a, s = ds.theta[:4], ds.theta[4:]
    assert a.sum() - s.sum() == 0.0 and a.sum() + s.sum() == dp.nu_sum


def test_initialize_nu_one_inside_box():
    dp = _dp(np.arange(6.0).reshape(3, 2), np.zeros(3), nu=1.0)
    ds = initialize(dp)
    assert np.all(ds.theta < dp.upper) and ds.theta[0] == pytest.approx(1 / 6)


def test_scores_on_tiny_instance(tiny_dp):
    # theta = [0.25, 0.25, 0, 0]: Qbar theta = 0, so grad = l = [3, -3, 5, -1];
    # the single-index alpha blocks give zero spread, gamma scores -5, mu scores |-1|
    sc = compute_scores(tiny_dp, initialize(tiny_dp))
    assert sc.deltas == (0.0, 0.0, -5.0, 1.0)
    assert sc.block is Block.MU and sc.u_mu == 0 and sc.delta == 1.0


def test_empty_blocks_score_minus_infinity():
    dp = _dp([[0.0], [1.0], [3.0]], [0.0, 1.0, 2.0])
    sc = compute_scores(dp, initialize(dp))
    assert sc.delta3 == -math.inf and sc.delta4 == -math.inf


def test_positive_gamma_gradients_do_not_violate():
    dp = _dp([[0.0], [1.0]], [0.0, 1.0], lc=LinearConstraints([[1.0]], [10.0], np.zeros((0, 1)), []))
    sc = compute_scores(dp, initialize(dp))
    assert sc.delta3 < 0


def _state(theta, grad):
    theta = np.array(theta, dtype=float)
    return DualState(theta, np.array(grad, dtype=float), 0.0)


def test_pair_update_clips_to_exact_bound():
    # ||X_0 - X_1||^2 = 4, grad difference -2, alpha = (0.1, 0.3), C/n = 0.5
    dp = _dp([[0.0], [2.0]], [0.0, 0.0])
    ds = _state([0.1, 0.3, 0.2, 0.2], [0.0, 2.0, 0.0, 0.0])
    t = alpha_pair_update(dp, ds, 0, 1)
    assert t == 0.3
    assert ds.theta[1] == 0.0 and ds.theta[0] == pytest.approx(0.4)


def test_pair_update_rejects_zero_step():
    dp = _dp([[0.0], [2.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        alpha_pair_update(dp, _state([0.1, 0.3, 0.2, 0.2], [1.0, 1.0, 0.0, 0.0]), 0, 1)


def test_pair_update_zero_curvature():
    dp = _dp([[1.0], [1.0]], [0.0, 1.0])
    with pytest.raises(ZeroCurvatureError):
        alpha_pair_update(dp, _state([0.1, 0.3, 0.2, 0.2], [0.0, 2.0, 0.0, 0.0]), 0, 1)


def test_pair_update_keeps_gradient_and_objective_exact():
    dp = random_problem(11, n=6, p=3, family="none")
    ds = initialize(dp)
    sc = compute_scores(dp, ds)
    alpha_pair_update(dp, ds, sc.i, sc.j)
    np.testing.assert_allclose(ds.grad, gradient_full(dp, ds.theta), rtol=1e-8, atol=1e-12)
    assert ds.objective == pytest.approx(objective(dp, ds.theta), abs=1e-12)


def _coord_dp():
    # (AA^T)_00 = 2 and (Gamma Gamma^T)_00 = 2
    lc = LinearConstraints([[1.0, 1.0]], [0.0], [[1.0, 1.0]], [0.0])
    return _dp([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], lc=lc)


@pytest.mark.parametrize("g, old, new", [(3.0, 1.0, 0.0), (-4.0, 0.0, 2.0)])
def test_gamma_update_formula(g, old, new):
    dp = _coord_dp()
    ds = _state([0, 0, 0, 0, old, 0], [0, 0, 0, 0, g, 0])
    assert gamma_update(dp, ds, 0) == new


def test_mu_update_formula():
    dp = _coord_dp()
    ds = _state([0] * 6, [0, 0, 0, 0, 0, -4.0])
    assert mu_update(dp, ds, 0) == 2.0
    with pytest.raises(ValueError):
        mu_update(dp, _state([0] * 6, [0] * 6), 0)


def test_coordinate_updates_zero_their_fresh_gradient():
    dp = random_problem(5, n=5, p=3, family="mixed")
    ds = initialize(dp)
    n = dp.layout.n
    ds.grad = gradient_full(dp, ds.theta)
    if ds.grad[2 * n] < 0:  # unclipped gamma step
        gamma_update(dp, ds, 0)
        assert abs(gradient_full(dp, ds.theta)[2 * n]) <= 1e-10
    mu_update(dp, ds, 0)
    assert abs(gradient_full(dp, ds.theta)[2 * n + 1]) <= 1e-10


def test_unconstrained_problem_uses_only_pair_blocks():
    dp = random_problem(2, n=6, p=3, family="none")
    _, rep = solve(dp)
    assert rep.converged and rep.block_update_counts[2:] == [0, 0]


def test_simplex_instance_matches_oracle():
    dp = random_problem(8, n=4, p=2, family="simplex", tau=1e-6)
    _, rep = solve(dp)
    assert rep.final_objective == pytest.approx(oracle_solve_dual(dp).objective, abs=1e-5)


def test_iteration_cap_is_reported():
    dp = random_problem(4, n=6, p=3, family="simplex")
    dp = DualProblem(dp.ts, dp.lc, Hyperparameters(C=2.0, nu=0.5, tau=1e-9, max_iter=3))
    _, rep = solve(dp)
    assert rep.termination is Termination.ITERATION_CAP and rep.iterations == 3
    assert not rep.converged


def test_infeasible_constraints_flag_divergence():
    lc = LinearConstraints([[1.0], [-1.0]], [-1.0, -1.0], np.zeros((0, 1)), [])  # beta <= -1 and beta >= 1
    dp = _dp([[0.0], [1.0], [2.0]], [0.0, 1.0, 2.0], lc=lc, max_iter=3000)
    _, rep = solve(dp)
    assert rep.termination is Termination.ITERATION_CAP and rep.diverging


def test_warm_start_from_optimum_stops_immediately():
    dp = random_problem(9, n=5, p=3, family="nonneg")
    ds, _ = solve(dp)
    _, rep = solve(dp, state=ds.copy())
    assert rep.iterations == 0 and rep.converged


def test_unknown_gamma_rule():
    with pytest.raises(ValueError):
        solve(random_problem(0), gamma_rule="greedy")


# instance on which the literal gamma score stops early: a positive multiplier
# with a positive gradient is never scored
LITERAL_RULE_X = [[0.2, -0.5, -0.4], [-2.4, 1.8, 1.1], [-0.3, 0.8, 0.3], [-0.6, 1.0, -0.3], [-0.3, -0.8, 0.5]]
LITERAL_RULE_Y = [-0.1, 0.5, -0.6, 0.1, -0.9]


def test_literal_gamma_rule_false_convergence():
    dp = _dp(LITERAL_RULE_X, LITERAL_RULE_Y, lc=make_constraints("nnsvr", 3), C=2.0, tau=1e-6)
    opt = oracle_solve_dual(dp).objective
    _, literal = solve(dp, gamma_rule="literal", engine="python")
    ds, comp = solve(dp)
    assert literal.converged and literal.final_objective - opt > 1e-2
    assert comp.converged and comp.final_objective == pytest.approx(opt, abs=1e-6)


@settings(max_examples=25)
@given(st.integers(0, 100_000))
def test_engines_agree(seed):
    dp = random_problem(seed, n=8, p=3, family=("none", "nonneg", "simplex", "mixed")[seed % 4])
    a, ra = solve(dp, engine="python")
    b, rb = solve(dp, engine="compiled")
    assert ra.termination is rb.termination
    assert ra.final_objective == pytest.approx(rb.final_objective, abs=1e-6)
    if ra.iterations == rb.iterations:
        np.testing.assert_allclose(a.theta, b.theta, atol=1e-9)


def test_callback_forces_python_engine():
    dp = random_problem(1)
    with pytest.raises(ValueError):
        solve(dp, engine="compiled", callback=lambda ev: None)


@settings(max_examples=30)
@given(st.integers(0, 100_000), st.sampled_from(["complementary", "literal"]))
def test_trace_invariants(seed, rule):
    """Feasibility, descent, non-reviolation and drift along a full trace."""
    dp = random_problem(seed, tau=1e-6)
    tau = dp.hp.tau
    ub = dp.upper
    lay = dp.layout

    def check(ev):
        ds = ev.state
        th = ds.theta
        ab = th[:2 * lay.n]
        assert np.all(ab >= 0) and np.all(ab <= ub) and np.all(th[lay.gamma] >= 0)
        v = feasibility_violation(dp, th)
        assert v["balance"] <= 1e-10 and v["nu_sum"] <= 1e-10
        assert ds.objective <= ev.objective_before + 1e-12
        g = gradient_full(dp, th)
        if ev.block in (Block.ALPHA, Block.ALPHA_STAR):
            off = 0 if ev.block is Block.ALPHA else lay.n
            i, j = ev.indices
            # (a, b) violates when a can increase, b can decrease and g_b - g_a > tau
            for a, b in ((i, j), (j, i)):
                if th[off + a] < ub and th[off + b] > 0:
                    assert g[off + b] - g[off + a] <= tau
        elif ev.block is Block.GAMMA:
            k = 2 * lay.n + ev.indices[0]
            s = abs(g[k]) if (th[k] > 0 and rule == "complementary") else -g[k]
            assert s <= tau
        else:
            assert abs(g[2 * lay.n + lay.k1 + ev.indices[0]]) <= tau

    ds, rep = solve(dp, True, gamma_rule=rule, callback=check)
    traj = rep.trajectory
    assert [t[0] for t in traj] == list(range(len(traj)))
    assert all(b[1] <= a[1] + 1e-12 for a, b in zip(traj, traj[1:]))
    assert all(d <= 1e-8 for d in rep.drift_checks)
    if rep.converged:
        fresh = compute_scores(dp, DualState(ds.theta, gradient_full(dp, ds.theta), 0.0), rule)
        assert fresh.delta <= tau
