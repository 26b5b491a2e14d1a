import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from objsupp.approx import (
    SGD,
    Adam,
    CriticSet,
    MLPCategoricalPolicy,
    MLPCritic,
    ParamVector,
    SquashedGaussianPolicy,
    TabularCritic,
    TabularSoftmaxPolicy,
    finite_diff_check,
    load_checkpoint,
    make_optimizer,
    save_checkpoint,
)
from objsupp.checks import check_approximator_gradients


def test_param_vector_blocks_and_dict_round_trip():
    pv = ParamVector.from_blocks({"w": np.arange(6.0).reshape(2, 3), "b": np.array([1.5])})
    assert len(pv) == 7
    np.testing.assert_array_equal(pv.block("w"), [[0, 1, 2], [3, 4, 5]])
    back = ParamVector.from_dict(pv.to_dict())
    np.testing.assert_array_equal(back.values, pv.values)
    assert back.layout == pv.layout
    with pytest.raises(ValueError):
        ParamVector(np.array([np.inf]), {})


@pytest.mark.parametrize("suffix", [".json", ".npz"])
def test_checkpoint_round_trip_is_bit_exact(tmp_path, suffix):
    rng = np.random.default_rng(0)
    pol = SquashedGaussianPolicy(5, 2, 1.0, (8,), rng)
    pol.set_values(rng.normal(size=len(pol.params)) / 3.0)
    path = tmp_path / f"ck{suffix}"
    save_checkpoint(path, {"pi": pol.params}, {"note": "x"})
    params, meta = load_checkpoint(path)
    assert meta == {"note": "x"}
    assert params["pi"].values.tobytes() == pol.params.values.tobytes()
    assert params["pi"].layout == pol.params.layout


def test_finite_diff_check_on_known_functions():
    def quad(x):
        return float(x @ x), 2 * x

    assert finite_diff_check(quad, np.array([1.0, -2.0, 0.5])) < 1e-8

    def wrong(x):
        return float(x @ x), 3 * x

    assert finite_diff_check(wrong, np.array([1.0, -2.0])) > 0.1
    assert finite_diff_check(lambda x: (1.0, np.zeros_like(x)), np.ones(3)) == 0.0
    with pytest.raises(ValueError):
        finite_diff_check(quad, np.ones(2), step=0.0)


def test_all_families_match_finite_differences():
    res = check_approximator_gradients(np.random.default_rng(1))
    assert res.passed, res.detail
    assert set(res.detail) == {"tabular_softmax_policy", "mlp_categorical_policy", "squashed_gaussian_policy",
                               "tabular_critic", "mlp_critic_discrete", "mlp_critic_continuous"}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=4, max_size=4))
def test_softmax_probabilities_normalised(logits):
    pol = TabularSoftmaxPolicy(1, 4)
    pol.set_values(np.array(logits))
    p = pol.prob_table()[0]
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    np.testing.assert_allclose(np.exp(pol.log_probs([0] * 4, range(4))), p, rtol=1e-9, atol=1e-300)


def test_tabular_softmax_score_matches_closed_form():
    pol = TabularSoftmaxPolicy(2, 3)
    pol.set_values(np.array([0.0, 1.0, 2.0, 0.0, 0.0, 0.0]))
    g = pol.log_prob_grad(0, 1).block("logits")
    p = pol.prob_table()[0]
    np.testing.assert_allclose(g[0], np.eye(3)[1] - p)
    np.testing.assert_array_equal(g[1], 0.0)


def test_squashed_gaussian_density_integrates_to_one():
    rng = np.random.default_rng(2)
    pol = SquashedGaussianPolicy(3, 1, 2.0, (8,), rng, init_log_std=-0.3)
    pol.set_values(pol.params.values + 0.5 * rng.normal(size=len(pol.params)))
    s = rng.normal(size=3)
    total, _ = integrate.quad(lambda a: np.exp(pol.log_prob(s, [a])), -2.0, 2.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)
    mean_a, _ = integrate.quad(lambda a: a * np.exp(pol.log_prob(s, [a])), -2.0, 2.0, limit=200)
    draws = pol.sample_batch(np.repeat(s[None], 20000, axis=0), rng)[:, 0]
    assert np.all(np.abs(draws) < 2.0)
    assert abs(draws.mean() - mean_a) < 3 * draws.std() / np.sqrt(len(draws))


def test_squashed_gaussian_rejects_out_of_bound_actions():
    pol = SquashedGaussianPolicy(2, 2, 1.0, (4,))
    with pytest.raises(ValueError):
        pol.log_probs(np.zeros((1, 2)), [[1.5, 0.0]])


def test_score_has_zero_mean_under_own_samples():
    rng = np.random.default_rng(3)
    pol = SquashedGaussianPolicy(2, 2, 1.0, (8,), rng)
    S = np.repeat(rng.normal(size=(1, 2)), 40000, axis=0)
    A = pol.sample_batch(S, rng)
    g = pol.score_sum(S, A, np.ones(len(S))) / len(S)
    per = np.stack([pol.score_sum(S[k:k + 1], A[k:k + 1], np.ones(1)) for k in range(0, 2000)])
    se = per.std(axis=0) / np.sqrt(len(S))
    assert np.all(np.abs(g) <= 4 * se + 1e-9)


@pytest.mark.parametrize("make", [
    lambda rng: TabularSoftmaxPolicy(4, 3),
    lambda rng: MLPCategoricalPolicy(4, 3, (8,), rng),
    lambda rng: SquashedGaussianPolicy(4, 2, 1.0, (8,), rng),
])
def test_batch_sample_matches_sequential_sampling(make):
    rng = np.random.default_rng(4)
    pol = make(rng)
    states = np.arange(4) if isinstance(pol, TabularSoftmaxPolicy) else rng.normal(size=(4, 4))
    batch = pol.batch_sample(states, [np.random.default_rng(k) for k in range(4)])
    seq = [pol.sample(states[k], np.random.default_rng(k)) for k in range(4)]
    np.testing.assert_array_equal(np.asarray(batch), np.asarray(seq))


def test_tabular_critic_regress_and_nonneg_clamp():
    c = TabularCritic(2, 2, nonneg=True)
    mse = c.regress([0, 0, 1], [1, 1, 0], [2.0, 4.0, -1.0], 0.5)
    assert mse == pytest.approx((4 + 16 + 1) / 3)
    np.testing.assert_allclose(c.table, [[0, 1.5], [-0.5, 0]])
    np.testing.assert_allclose(c.value([0, 1], [1, 0]), [1.5, 0.0])


@pytest.mark.parametrize("discrete", [True, False])
def test_mlp_critic_fits_targets(discrete):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(64, 3))
    if discrete:
        c = MLPCritic(3, n_actions=2, hidden=(16,), rng=rng)
        A = rng.integers(2, size=64)
        y = X[:, 0] + A
    else:
        c = MLPCritic(3, act_dim=1, hidden=(16,), rng=rng)
        A = rng.uniform(-1, 1, size=(64, 1))
        y = X[:, 0] + A[:, 0]
    c.use_adam()
    first = c.regress(X, A, y, 0.01)
    for _ in range(500):
        last = c.regress(X, A, y, 0.01)
    assert last < 0.05 * first


def test_mlp_critic_needs_exactly_one_action_spec():
    with pytest.raises(ValueError):
        MLPCritic(3)
    with pytest.raises(ValueError):
        MLPCritic(3, n_actions=2, act_dim=1)


def test_critic_set_shapes_and_nonneg():
    cs = CriticSet(TabularCritic(3, 2), [TabularCritic(3, 2), TabularCritic(3, 2)])
    assert all(c.nonneg for c in cs.safety_critics)
    cs.safety_critics[0].set_values(-np.ones(6))
    q = cs.q_safety([0, 1], [1, 0])
    assert q.shape == (2, 2) and np.all(q == 0)
    snap = cs.snapshot()
    cs.task_critic.set_values(np.ones(6))
    assert np.all(snap.task_critic.table == 0)


def test_optimizers():
    g = np.array([1.0, -2.0])
    np.testing.assert_allclose(SGD(2, 0.1).direction(g), [0.1, -0.2])
    # first bias-corrected Adam step is lr * sign(g)
    np.testing.assert_allclose(Adam(2, 0.01).direction(g), [0.01, -0.01], rtol=1e-6)
    assert isinstance(make_optimizer("adam", 2, 0.1), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 2, 0.1)
