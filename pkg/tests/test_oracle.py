import math

import numpy as np
import pytest

from objsupp.approx import TabularSoftmaxPolicy
from objsupp.checks import check_policy_gradients, check_tower_equivalence, random_cmdp
from objsupp.core import TASK, CmdpSpec, ConstraintSpec, sample_trajectory
from objsupp.oracle import (
    DualTable,
    EnumerationBudgetError,
    DivergenceError,
    Occupancy,
    dual_update,
    dump_oracle,
    enumerate_risk_probabilities,
    exact_objective,
    exact_policy_evaluation,
    lagrangian_gradient,
    load_oracle,
    max_violation,
    occupancy_measure,
    primal_dual_solve,
    state_action_distributions,
    value_iteration,
)


def chain(gamma):
    """s0 -> s1 (reward 0), s1 absorbing with reward 1; constraint flags s1."""
    P = np.zeros((2, 1, 2))
    P[:, 0, 1] = 1.0
    R = np.zeros((2, 1, 2))
    R[1, 0, 1] = 1.0
    return CmdpSpec(P, R, gamma, (ConstraintSpec(lambda s: int(s == 1), 0.5),), 0.1, np.array([1.0, 0.0]))


def test_chain_values_frozen():
    # V(s1) = 1 / (1 - 0.9) = 10, Q(s0) = 0 + 0.9 * 10 = 9
    np.testing.assert_allclose(exact_policy_evaluation(chain(0.9), np.ones((2, 1)), TASK), [[9.0], [10.0]], atol=1e-12)
    # constraint: C(s1) credited on entry, gamma_c = 0.5 -> 1 / (1 - 0.5) = 2 from either state
    np.testing.assert_allclose(exact_policy_evaluation(chain(0.9), np.ones((2, 1)), 0), [[2.0], [2.0]], atol=1e-12)


def test_chain_occupancy_frozen():
    d = occupancy_measure(chain(0.5), np.ones((2, 1))).d
    np.testing.assert_allclose(d[:, 0], [0.5, 0.5], atol=1e-12)
    with pytest.raises(ValueError):
        Occupancy(np.array([[-0.1]]))


def test_occupancy_sums_to_one_and_matches_marginals(spec3, rng):
    pol = TabularSoftmaxPolicy(spec3.state_count, 4)
    pol.set_values(rng.normal(size=len(pol.params)))
    occ = occupancy_measure(spec3, pol)
    assert occ.d.sum() == pytest.approx(1.0, abs=1e-12)
    # (1 - gamma) * sum_t gamma^t Pr(s_t, a_t), truncated far out
    dist = state_action_distributions(spec3, pol, 800)
    g = spec3.gamma ** np.arange(800)
    np.testing.assert_allclose(occ.d, (1 - spec3.gamma) * np.einsum("t,tsa->sa", g, dist), atol=1e-12)


def test_value_iteration_policy_is_greedy_and_consistent(spec3):
    Q, pi = value_iteration(spec3)
    Qpi = exact_policy_evaluation(spec3, pi, TASK)
    np.testing.assert_allclose(Qpi, Q, atol=1e-9)
    assert exact_objective(spec3, pi) >= exact_objective(spec3, np.full((spec3.state_count, 4), 0.25))


def test_policy_gradient_matches_finite_differences(spec3, rng):
    res = check_policy_gradients(spec3, rng, points=3)
    assert res.passed, res.detail


def test_risk_probabilities_against_monte_carlo(spec3, grid3, rng):
    from objsupp.envs import HazardGrid

    pol = TabularSoftmaxPolicy(spec3.state_count, 4)
    pol.set_values(rng.normal(size=len(pol.params)))
    H = 3
    rt = enumerate_risk_probabilities(spec3, pol, H)
    assert np.all(rt.p_minus <= np.min(1 - rt.p, axis=0) + 1e-12)
    env = HazardGrid(grid3)
    s0 = env.index[(0, 0)]
    n = 4000
    hits = np.zeros(2)
    none = 0
    for k in range(n):
        env.reset(k)
        r = np.random.default_rng(10_000 + k)
        flags = [env.step(1)[2]]
        done = False
        # continue with the policy; absorbing terminal cells carry no further flags
        s = env.index[env._cell]
        for _ in range(H - 1):
            if spec3.transition[s, 0, -1] == 1.0 or env.cfg.is_terminal(env._cell):
                break
            s, _, f, done = env.step(pol.sample(s, r))
            flags.append(f)
        F = np.array(flags).max(axis=0)
        hits += F
        none += int(F.sum() == 0)
    for est, p in ((hits / n, rt.p[:, s0, 1]), (none / n, rt.p_minus[s0, 1])):
        se = np.sqrt(np.maximum(p * (1 - p), 1e-4) / n)
        assert np.all(np.abs(est - p) <= 3 * se)


def test_enumeration_budget(spec3):
    with pytest.raises(EnumerationBudgetError):
        enumerate_risk_probabilities(spec3, np.full((spec3.state_count, 4), 0.25), 12, max_paths=1000)
    with pytest.raises(ValueError):
        enumerate_risk_probabilities(spec3, np.full((spec3.state_count, 4), 0.25), 0)


def test_tower_equivalence_small_mdp(rng):
    res = check_tower_equivalence(random_cmdp(rng, 3, 2), rng, horizon=3)
    assert res.passed, res.error


def test_dual_update_frozen_examples():
    lam = DualTable(np.array([[[0.0, 0.1, 1.0]]]))
    q = np.array([[[0.3, 0.0, 0.5]]])
    d = np.array([[0.5, 0.5, 0.0]])
    new = dual_update(lam, q, d, 0.1, 2.0).lam
    # 0 + 2 * 0.5 * 0.2 = 0.2; max(0, 0.1 - 2 * 0.5 * 0.1) = 0; unsupported cell unchanged
    np.testing.assert_allclose(new, [[[0.2, 0.0, 1.0]]], atol=1e-15)
    with pytest.raises(ValueError):
        dual_update(lam, q, d, 0.1, 0.0)
    with pytest.raises(ValueError):
        dual_update(lam, q[..., :2], d, 0.1, 1.0)
    with pytest.raises(ValueError):
        DualTable(np.array([-1.0]))


def test_lagrangian_gradient_with_zero_multipliers_is_task_gradient(spec3, rng):
    pol = TabularSoftmaxPolicy(spec3.state_count, 4)
    pol.set_values(rng.normal(size=len(pol.params)))
    zero = DualTable.zeros(2, spec3.state_count, 4)
    g = lagrangian_gradient(spec3, pol, zero, 0.05).values
    # occupancy-weighted advantage form of (1 - gamma) grad J_R
    eps = 1e-6
    num = np.zeros_like(g)
    for j in range(len(g)):
        x = pol.params.values.copy()
        x[j] += eps
        p2 = TabularSoftmaxPolicy(spec3.state_count, 4)
        p2.set_values(x)
        x[j] -= 2 * eps
        p3 = TabularSoftmaxPolicy(spec3.state_count, 4)
        p3.set_values(x)
        num[j] = (exact_objective(spec3, p2) - exact_objective(spec3, p3)) / (2 * eps)
    np.testing.assert_allclose(g / (1 - spec3.gamma), num, atol=1e-6)


def test_primal_dual_reduces_violation_and_diverges_loudly(spec3):
    pol0 = TabularSoftmaxPolicy(spec3.state_count, 4)
    pol, dual, trace = primal_dual_solve(spec3, pol0, 0.05, 300, 20.0, 50.0)
    assert np.all(dual.lam >= 0)
    assert len(trace.task_objective) == 300
    assert max(trace.max_violation[-1]) < max(trace.max_violation[0])
    assert set(trace.to_dict()) == {"task_objective", "max_violation", "lambda_norm", "grad_norm"}
    with pytest.raises(DivergenceError):
        primal_dual_solve(spec3, pol0, 0.05, 5, 1.0, 1.0, max_grad_norm=1e-9)


def test_max_violation_uses_support(spec3):
    pi = np.zeros((spec3.state_count, 4))
    pi[:, 1] = 1.0  # always "down": never enters the hazard from the start
    v = max_violation(spec3, pi, 0.05)
    assert v.shape == (2,)
    assert np.all(np.isfinite(v))


def test_oracle_dump_round_trip(tmp_path, spec3):
    Q = exact_policy_evaluation(spec3, np.full((spec3.state_count, 4), 0.25))
    path = tmp_path / "o.json"
    dump_oracle(path, q_task=Q)
    np.testing.assert_array_equal(load_oracle(path)["q_task"], Q)


def test_proxy_constants_frozen():
    from objsupp.algos import SuppressionConfig, suppression_terms

    p_minus, p, r = suppression_terms(np.array([1.0, 0.0]), SuppressionConfig(kappa=0.5, weights=(1.0, 1.0)))
    assert float(p_minus) == pytest.approx(0.606531, abs=1e-6)
    assert r[0] == pytest.approx(1.648721, abs=1e-6)
    assert r[1] == 0.0
    p_minus, _, _ = suppression_terms(np.array([1.0, 0.5]), SuppressionConfig(kappa=1.0))
    assert float(p_minus) == pytest.approx(0.223130, abs=1e-6)
    assert math.isclose(float(p_minus), math.exp(-1.5))
