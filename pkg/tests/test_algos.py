import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from objsupp.algos import (
    SafetyLayer,
    SampleBatch,
    SuppressionConfig,
    expected_action_batch,
    hard_switch_gradient,
    lagrangian_sample_gradient,
    proxy_no_risk_prob,
    proxy_risk_prob,
    recovery_gradient,
    reward_penalty_gradient,
    safety_layer_select,
    suppression_gradient,
    suppression_gradient_r_form,
    suppression_terms,
    task_policy_gradient,
    train_recovery_policy,
    weighted_score,
)
from objsupp.approx import CriticSet, SquashedGaussianPolicy, TabularCritic, TabularSoftmaxPolicy
from objsupp.checks import check_reduction, check_rewrite_identity, random_cmdp
from objsupp.core import RECOVERY, TASK, Step, Trajectory


def _critics(q_task, q_safety):
    S, A = q_task.shape
    cs = CriticSet(TabularCritic(S, A), [TabularCritic(S, A) for _ in q_safety])
    cs.task_critic.set_values(q_task.ravel())
    for c, q in zip(cs.safety_critics, q_safety):
        c.set_values(q.ravel())
    return cs


def test_proxy_values_and_errors():
    np.testing.assert_allclose(proxy_risk_prob([0.2, 1.7]), [0.2, 1.0])
    np.testing.assert_allclose(proxy_risk_prob([0.2, 1.7], clamp=False), [0.2, 1.7])
    assert proxy_no_risk_prob([0.0, 0.0], 3.0) == 1.0
    with pytest.raises(ValueError):
        proxy_risk_prob([-0.1])
    with pytest.raises(ValueError):
        proxy_no_risk_prob([0.1], -1.0)
    with pytest.raises(ValueError):
        proxy_no_risk_prob([np.inf], 1.0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=4), st.floats(0, 10), st.floats(0, 5))
def test_no_risk_proxy_in_unit_interval_and_monotone(q, kappa, bump):
    p = proxy_no_risk_prob(q, kappa)
    assert 0.0 <= p <= 1.0
    q2 = list(q)
    q2[0] += bump
    assert proxy_no_risk_prob(q2, kappa) <= p


def test_suppression_config_validation():
    for bad in (dict(kappa=-1), dict(weights=(-1.0, 1.0)), dict(epsilon=-0.1), dict(policy_lr=0.0)):
        with pytest.raises(ValueError):
            SuppressionConfig(**bad)
    with pytest.raises(ValueError):
        suppression_terms(np.zeros((2, 3)), SuppressionConfig(weights=(1.0, 1.0)))


def test_reduction_and_rewrite_identities(rng):
    spec = random_cmdp(rng, 5, 3)
    assert check_reduction(spec, rng).error < 1e-12
    assert check_rewrite_identity(spec, rng, batches=20).error < 1e-12
    assert check_reduction(spec, rng, corrupt=0.3).error > 1e-3


def test_suppression_coefficient_by_hand():
    q_task = np.array([[2.0, 1.0]])
    q_safety = np.array([[[0.5, 0.0]], [[1.5, 0.0]]])
    cs = _critics(q_task, q_safety)
    pol = TabularSoftmaxPolicy(1, 2)
    batch = SampleBatch(np.array([0]), np.array([0]), np.array([1.0]))
    cfg = SuppressionConfig(kappa=1.0, weights=(1.0, 2.0))
    g = suppression_gradient(batch, pol, cs, cfg).values
    coef = np.exp(-2.0) * 2.0 - (1.0 * 0.5 * 0.5 + 2.0 * 1.0 * 1.5)
    np.testing.assert_allclose(g, coef * np.array([0.5, -0.5]))
    np.testing.assert_allclose(suppression_gradient_r_form(batch, pol, cs, cfg).values, g, atol=1e-14)
    lam = lagrangian_sample_gradient(batch, pol, cs, np.array([[1.0, 2.0]]), epsilon=0.5).values
    np.testing.assert_allclose(lam, (2.0 - (0.0 + 2.0 * 1.0)) * np.array([0.5, -0.5]))
    rp = reward_penalty_gradient(batch, pol, cs, (1.0, 2.0)).values
    np.testing.assert_allclose(rp, (2.0 - 0.5 - 3.0) * np.array([0.5, -0.5]))


def test_expected_action_batch_discrete_and_continuous(rng):
    pol = TabularSoftmaxPolicy(3, 4)
    pol.set_values(rng.normal(size=12))
    b = expected_action_batch(np.array([0, 2]), pol)
    assert len(b) == 8 and b.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(b.weights[:4] * 2, pol.prob_table()[0])
    sg = SquashedGaussianPolicy(3, 2, 1.0, (4,), rng)
    b = expected_action_batch(rng.normal(size=(5, 3)), sg, rng, n_samples=3)
    assert len(b) == 15 and b.weights.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(b.groups, np.repeat(np.arange(5), 3))
    with pytest.raises(ValueError):
        expected_action_batch(np.zeros((0, 3)), sg)


def test_state_baseline_leaves_enumerated_gradient_unchanged(rng):
    pol = TabularSoftmaxPolicy(4, 3)
    pol.set_values(rng.normal(size=12))
    cs = _critics(rng.normal(size=(4, 3)), rng.exponential(0.3, size=(2, 4, 3)))
    b = expected_action_batch(np.array([0, 1, 1, 3]), pol)
    cfg = SuppressionConfig(kappa=2.0)
    plain = suppression_gradient(b, pol, cs, cfg).values
    based = suppression_gradient(b, pol, cs, SuppressionConfig(kappa=2.0, state_baseline=True)).values
    np.testing.assert_allclose(based, plain, atol=1e-14)
    with pytest.raises(ValueError):
        weighted_score(pol, SampleBatch(np.array([0]), np.array([0]), np.array([1.0])), np.ones(1),
                       state_baseline=True)


def test_hard_switch_uses_hindsight_indicators():
    cs = _critics(np.array([[1.0, 3.0], [2.0, 0.0]]), np.array([[[0.5, 0.5], [0.5, 0.5]]]))
    pol = TabularSoftmaxPolicy(2, 2)
    steps = (Step(0, 1, 1, 0.0, (0,), 0.0), Step(1, 0, 1, 0.0, (1,), 0.0), Step(1, 0, 0, 0.0, (0,), 0.0))
    g = hard_switch_gradient([Trajectory(steps, False, 0)], pol, cs, [2.0]).block("logits")
    # chi = [1, 1, 0]: first two steps minimise risk (coef -2 * 0.5), the last maximises Q_R = 2
    np.testing.assert_allclose(g[0], -1.0 * np.array([-0.5, 0.5]))
    np.testing.assert_allclose(g[1], -1.0 * np.array([0.5, -0.5]) + 2.0 * np.array([0.5, -0.5]))
    with pytest.raises(ValueError):
        hard_switch_gradient([], pol, cs, [1.0])


def test_safety_layer_switches_on_threshold(rng):
    cs = _critics(np.zeros((1, 2)), np.array([[[0.05, 0.9]]]))
    task, rec = TabularSoftmaxPolicy(1, 2), TabularSoftmaxPolicy(1, 2)
    task.set_values(np.array([0.0, 50.0]))
    rec.set_values(np.array([50.0, 0.0]))
    a, layer = safety_layer_select(0, task, rec, cs, 0.1, rng)
    assert (a, layer) == (0, RECOVERY)
    layer_obj = SafetyLayer(cs, 0.95, rec, task, record=True)
    a, layer, logp = layer_obj.select(0, rng)
    assert (a, layer) == (1, TASK) and logp == pytest.approx(task.log_prob(0, 1))
    assert len(layer_obj.log) == 1 and layer_obj.log[0][3] == TASK
    with pytest.raises(ValueError):
        SafetyLayer(cs, -1.0, rec, task)


def test_recovery_gradient_lowers_risk(rng):
    q_safety = np.array([[[0.9, 0.1]], [[0.0, 0.0]]])
    cs = _critics(np.array([[5.0, 0.0]]), q_safety)
    rec = TabularSoftmaxPolicy(1, 2)
    b = expected_action_batch(np.array([0]), rec)
    cfg = SuppressionConfig(kappa=1.0, policy_lr=1.0)
    g = recovery_gradient(b, rec, cs, cfg, suppress=False).values
    assert g[1] > 0 > g[0]
    before = rec.prob_table()[0, 1]
    train_recovery_policy(rec, b, cs, cfg)
    assert rec.prob_table()[0, 1] > before
    with_task = recovery_gradient(b, rec, cs, SuppressionConfig(kappa=1.0, recovery_task_term=True)).values
    assert with_task[0] > recovery_gradient(b, rec, cs, cfg).values[0]


def test_task_gradient_matches_enumerated_expectation(rng):
    pol = TabularSoftmaxPolicy(2, 3)
    pol.set_values(rng.normal(size=6))
    q = rng.normal(size=(2, 3))
    cs = _critics(q, np.zeros((1, 2, 3)))
    b = expected_action_batch(np.array([0, 1]), pol)
    g = task_policy_gradient(b, pol, cs).block("logits")
    p = pol.prob_table()
    np.testing.assert_allclose(g, 0.5 * p * (q - (p * q).sum(axis=1, keepdims=True)), atol=1e-14)
