"""Objective Suppression and the baselines it is compared against.

All gradient estimators share one form: a batch of ``(s, a)`` pairs with
sampling weights ``w_n`` and a per-sample coefficient ``c_n`` give

    g = sum_n w_n * c_n * grad log pi(a_n | s_n)

and differ only in ``c_n``. Critics enter as frozen snapshots (semi-gradient):
only ``log pi`` is differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .approx import CriticSet, ParamVector, Policy
from .core import RECOVERY, TASK, Trajectory, compute_risk_indicators


@dataclass(frozen=True)
class SuppressionConfig:
    kappa: float = 1.0
    weights: tuple = (1.0, 1.0)
    epsilon: float = 0.1
    policy_lr: float = 0.1
    normalize_advantage: bool = False
    # clamp the risk-probability proxy into [0, 1]; off gives the raw-critic variant
    clamp_proxy: bool = True
    # recovery policy also sees the suppressed task term
    recovery_task_term: bool = False
    # subtract the per-state weighted mean of the coefficient (needs batch groups)
    state_baseline: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if any(w < 0 for w in self.weights):
            raise ValueError("constraint weights must be nonnegative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not self.policy_lr > 0:
            raise ValueError("policy_lr must be positive")


@dataclass(frozen=True)
class SampleBatch:
    """State-action pairs with sampling weights.

    ``groups`` optionally labels samples drawn at the same visited state.
    """

    states: np.ndarray
    actions: np.ndarray
    weights: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        if len(self.weights) == 0:
            raise ValueError("batch is empty")
        if not (len(self.states) == len(self.actions) == len(self.weights)):
            raise ValueError("states, actions and weights must have equal length")

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], traj_weights=None) -> "SampleBatch":
        """Every executed step; step weights equal their trajectory's weight (default ``1/N``)."""
        if len(trajectories) == 0:
            raise ValueError("batch is empty")
        tw = np.full(len(trajectories), 1.0 / len(trajectories)) if traj_weights is None else np.asarray(traj_weights, float)
        S, A, W = [], [], []
        for tr, w in zip(trajectories, tw):
            for st in tr.steps:
                S.append(st.state)
                A.append(st.action)
                W.append(w)
        return cls(_stack(S), _stack(A), np.asarray(W))


def _stack(xs):
    if len(xs) and isinstance(xs[0], np.ndarray):
        return np.stack(xs)
    return np.asarray(xs)


def expected_action_batch(states, policy: Policy, rng: np.random.Generator | None = None,
                          n_samples: int = 8) -> SampleBatch:
    """Batch over visited ``states`` with actions drawn from ``policy`` itself.

    Discrete policies enumerate every action weighted by its probability;
    continuous ones draw ``n_samples`` actions per state. Each visited state
    carries total weight ``1 / len(states)``.
    """
    states = _stack(list(states)) if not isinstance(states, np.ndarray) else states
    N = len(states)
    if N == 0:
        raise ValueError("batch is empty")
    if policy.discrete:
        probs = policy.action_probs(states)
        A = probs.shape[1]
        S = np.repeat(states, A, axis=0)
        acts = np.tile(np.arange(A), N)
        return SampleBatch(S, acts, probs.ravel() / N, np.repeat(np.arange(N), A))
    rng = rng if rng is not None else np.random.default_rng(0)
    S = np.repeat(states, n_samples, axis=0)
    acts = policy.sample_batch(S, rng)
    return SampleBatch(S, acts, np.full(len(S), 1.0 / (N * n_samples)), np.repeat(np.arange(N), n_samples))


# ---------------------------------------------------------------------------
# risk-probability proxies


def proxy_risk_prob(q_c, clamp: bool = True):
    """Safety-critic value used as a risk probability, clamped into [0, 1]."""
    q = np.asarray(q_c, dtype=float)
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError("safety critic values must be finite and nonnegative")
    out = np.minimum(q, 1.0) if clamp else q
    return float(out) if out.ndim == 0 else out


def proxy_no_risk_prob(q_c_vector, kappa: float):
    """``exp(-kappa * sum_i q_i)`` over the last axis; strictly positive."""
    q = np.asarray(q_c_vector, dtype=float)
    if not np.all(np.isfinite(q)) or not np.isfinite(kappa):
        raise ValueError("non-finite input")
    if kappa < 0 or np.any(q < 0):
        raise ValueError("kappa and critic values must be nonnegative")
    out = np.exp(-kappa * q.sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def suppression_terms(q_c: np.ndarray, cfg: SuppressionConfig):
    """Return ``(p_minus, p, r)`` for critic values of shape (..., n)."""
    q_c = np.asarray(q_c, dtype=float)
    w = _check_weights(cfg.weights, q_c.shape[-1])
    p_minus = np.asarray(proxy_no_risk_prob(q_c, cfg.kappa))
    p = np.asarray(proxy_risk_prob(q_c, cfg.clamp_proxy))
    r = w * p / p_minus[..., None]
    return p_minus, p, r


def suppression_weights(s, a, critic_set: CriticSet, cfg: SuppressionConfig):
    """``(p_minus, p_vec, r_vec)`` at one state-action pair."""
    q_c = critic_set.q_safety([s], [a])[0]
    p_minus, p, r = suppression_terms(q_c, cfg)
    return float(p_minus), p, r


def _check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"{w.size} constraint weights for {n} safety critics")
    return w


# ---------------------------------------------------------------------------
# gradient estimators


def weighted_score(policy: Policy, batch: SampleBatch, coef: np.ndarray, baseline: bool = False,
                   state_baseline: bool = False) -> ParamVector:
    """``sum_n w_n (c_n - b) grad log pi(a_n|s_n)``.

    ``baseline`` uses the batch-weighted mean for ``b``. ``state_baseline``
    instead uses the weighted mean over samples sharing a group label; on an
    enumerated discrete batch this leaves the estimate unchanged, on ``K``
    sampled actions per state it scales the expectation by ``(K - 1) / K``.
    """
    coef = np.asarray(coef, dtype=float)
    if state_baseline:
        if batch.groups is None:
            raise ValueError("state baseline needs batch groups")
        g = np.asarray(batch.groups)
        num = np.bincount(g, batch.weights * coef)
        den = np.bincount(g, batch.weights)
        coef = coef - num[g] / np.where(den[g] > 0, den[g], 1.0)
    elif baseline:
        coef = coef - np.sum(batch.weights * coef) / np.sum(batch.weights)
    return policy.params.like(policy.score_sum(batch.states, batch.actions, batch.weights * coef))


def _values(batch: SampleBatch, critic_set: CriticSet):
    q_r = critic_set.q_task(batch.states, batch.actions)
    q_c = critic_set.q_safety(batch.states, batch.actions)
    if not (np.all(np.isfinite(q_r)) and np.all(np.isfinite(q_c))):
        raise ValueError("non-finite critic output")
    return q_r, q_c


def task_policy_gradient(batch: SampleBatch, policy: Policy, critic_set: CriticSet, normalize: bool = False,
                         state_baseline: bool = False) -> ParamVector:
    """Plain policy gradient ``E[Q_R grad log pi]``."""
    q_r, _ = _values(batch, critic_set)
    return weighted_score(policy, batch, q_r, normalize, state_baseline)


def suppression_gradient(batch: SampleBatch, policy: Policy, critic_set: CriticSet, cfg: SuppressionConfig) -> ParamVector:
    """``E[(p_minus Q_R - sum_i w_i p_i Q_Ci) grad log pi]`` with critic-based proxies."""
    q_r, q_c = _values(batch, critic_set)
    p_minus, p, _ = suppression_terms(q_c, cfg)
    w = np.asarray(cfg.weights)
    coef = p_minus * q_r - (w * p * q_c).sum(axis=1)
    return weighted_score(policy, batch, coef, cfg.normalize_advantage, cfg.state_baseline)


def lagrangian_sample_gradient(batch: SampleBatch, policy: Policy, critic_set: CriticSet, multipliers: np.ndarray,
                               epsilon: float = 0.0, scale: np.ndarray | None = None,
                               normalize: bool = False, state_baseline: bool = False) -> ParamVector:
    """``E[scale * (Q_R - sum_i lam_i (Q_Ci - eps)) grad log pi]`` with per-sample multipliers."""
    q_r, q_c = _values(batch, critic_set)
    lam = np.asarray(multipliers, dtype=float)
    coef = q_r - (lam * (q_c - epsilon)).sum(axis=1)
    if scale is not None:
        coef = np.asarray(scale) * coef
    return weighted_score(policy, batch, coef, normalize, state_baseline)


def suppression_gradient_r_form(batch: SampleBatch, policy: Policy, critic_set: CriticSet,
                                cfg: SuppressionConfig) -> ParamVector:
    """Suppression gradient as a ``p_minus``-weighted Lagrangian gradient with ``lam_i = r_i`` and ``eps = 0``."""
    _, q_c = _values(batch, critic_set)
    p_minus, _, r = suppression_terms(q_c, cfg)
    return lagrangian_sample_gradient(batch, policy, critic_set, r, 0.0, p_minus, cfg.normalize_advantage,
                                      cfg.state_baseline)


def reward_penalty_gradient(batch: SampleBatch, policy: Policy, critic_set: CriticSet, weights,
                            normalize: bool = False, state_baseline: bool = False) -> ParamVector:
    """Fixed-weight penalty ``E[(Q_R - sum_i w_i Q_Ci) grad log pi]``."""
    q_r, q_c = _values(batch, critic_set)
    w = _check_weights(weights, q_c.shape[1])
    return weighted_score(policy, batch, q_r - q_c @ w, normalize, state_baseline)


def hard_switch_gradient(trajectories: Sequence[Trajectory], policy: Policy, critic_set: CriticSet, weights,
                         traj_weights=None, include_current: bool = True) -> ParamVector:
    """Hindsight switching: ``sum_t (chi_bar_t Q_R - sum_i w_i chi_t^i Q_Ci) grad log pi``, averaged over trajectories.

    ``traj_weights`` replaces the default ``1/N`` per trajectory, e.g. with
    exact path probabilities.
    """
    n = critic_set.n_constraints
    w = _check_weights(weights, n)
    if len(trajectories) == 0:
        raise ValueError("batch is empty")
    coefs = []
    for tr in trajectories:
        if tr.n_constraints != n:
            raise ValueError(f"trajectory has {tr.n_constraints} risk channels, critic set has {n}")
        ind = compute_risk_indicators(tr, include_current)
        coefs.append(ind)
    batch = SampleBatch.from_trajectories(trajectories, traj_weights)
    q_r, q_c = _values(batch, critic_set)
    chi = np.concatenate([c.chi for c in coefs]).astype(float)
    chi_bar = np.concatenate([c.chi_bar for c in coefs]).astype(float)
    coef = chi_bar * q_r - (w * chi * q_c).sum(axis=1)
    return weighted_score(policy, batch, coef)


# ---------------------------------------------------------------------------
# safety layer and recovery policy


def safety_layer_select(state, task_policy: Policy, recovery_policy: Policy, critic_set: CriticSet, epsilon: float,
                        rng: np.random.Generator):
    """Propose from the task policy; hand over to the recovery policy if any safety critic exceeds ``epsilon``."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    proposal = task_policy.sample(state, rng)
    q = critic_set.q_safety([state], [proposal])[0]
    if not np.all(np.isfinite(q)):
        raise ValueError("non-finite safety critic output")
    if np.all(q <= epsilon):
        return proposal, TASK
    return recovery_policy.sample(state, rng), RECOVERY


@dataclass
class SafetyLayer:
    """Hierarchical action filter bound to frozen critic and policy snapshots.

    With ``record=True`` each decision is appended to ``log`` as
    ``(state, proposal, critic values, layer)``.
    """

    critic_set: CriticSet
    epsilon: float
    recovery_policy: Policy
    task_policy: Policy
    record: bool = False
    log: list = field(default_factory=list)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def select(self, state, rng: np.random.Generator):
        proposal = self.task_policy.sample(state, rng)
        q = self.critic_set.q_safety([state], [proposal])[0]
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite safety critic output")
        if np.all(q <= self.epsilon):
            action, layer, pol = proposal, TASK, self.task_policy
        else:
            action, layer, pol = self.recovery_policy.sample(state, rng), RECOVERY, self.recovery_policy
        if self.record:
            self.log.append((state, proposal, q.copy(), layer))
        return action, layer, pol.log_prob(state, action)


def recovery_gradient(batch: SampleBatch, recovery_policy: Policy, critic_set: CriticSet, cfg: SuppressionConfig,
                      suppress: bool = True) -> ParamVector:
    """Ascent direction for the recovery policy: ``E[-sum_i w_i m_i Q_Ci grad log sigma]``.

    ``m_i = p_i`` when ``suppress`` else 1. ``cfg.recovery_task_term`` adds the
    suppressed task term ``p_minus Q_R``.
    """
    q_r, q_c = _values(batch, critic_set)
    w = _check_weights(cfg.weights, q_c.shape[1])
    p_minus, p, _ = suppression_terms(q_c, cfg)
    mult = p if suppress else np.ones_like(q_c)
    coef = -(w * mult * q_c).sum(axis=1)
    if cfg.recovery_task_term:
        coef = coef + p_minus * q_r
    return weighted_score(recovery_policy, batch, coef, cfg.normalize_advantage, cfg.state_baseline)


def train_recovery_policy(recovery_policy: Policy, batch: SampleBatch, critic_set: CriticSet, cfg: SuppressionConfig,
                          suppress: bool = True, lr: float | None = None) -> Policy:
    """One plain gradient step on the recovery objective; returns the updated policy (in place)."""
    g = recovery_gradient(batch, recovery_policy, critic_set, cfg, suppress)
    recovery_policy.set_values(recovery_policy.params.values + (cfg.policy_lr if lr is None else lr) * g.values)
    return recovery_policy
