"""Online training of the task critic and the per-constraint safety critics.

Safety critics regress the discounted return of their own 0/1 flag channel;
the [0, 1] clamp used for risk probabilities lives downstream in ``algos``.
Terminal transitions bootstrap to zero on every channel.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .approx import Critic, CriticSet, TabularCritic
from .core import TASK, Trajectory, discounted_return


@dataclass(frozen=True)
class CriticTrainConfig:
    method: str = "td0"  # td0 | monte_carlo
    learning_rate: float = 0.5
    batch_size: int = 256
    target_update: float | None = None  # polyak tau in (0, 1]; None = bootstrap from the live critic
    epochs: int = 1
    # sgd | adam; adam applies to network critics only
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.method not in ("td0", "monte_carlo"):
            raise ValueError(f"unknown critic method {self.method!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown critic optimizer {self.optimizer!r}")
        if self.target_update is not None and not 0.0 < self.target_update <= 1.0:
            raise ValueError("polyak tau must lie in (0, 1]")


def td_update(critic: Critic, transition, discount: float, lr: float):
    """Move ``Q(s, a)`` toward ``r + discount * Q(s', a')`` by ``lr``.

    ``transition`` is ``(s, a, r, s', a')`` or ``(s, a, r, s', a', done)``.
    Returns the critic (updated in place) and the signed TD error.
    """
    s, a, r, s2, a2, *rest = transition
    done = bool(rest[0]) if rest else False
    if not 0.0 <= discount < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {discount}")
    boot = 0.0 if done or discount == 0.0 else critic.eval(s2, a2)
    target = float(r) + discount * boot
    if not np.isfinite(target):
        raise ValueError("non-finite TD target")
    if isinstance(critic, TabularCritic):
        return critic, critic.td_step(int(s), int(a), target, lr)
    err = target - float(critic.raw([s], [a])[0])
    critic.regress([s], [a], [target], lr)
    return critic, err


def mc_regress(critic: Critic, batch, lr: float):
    """One MSE gradient step toward empirical returns; returns (critic, pre-step mean squared residual)."""
    states, actions, returns = batch
    if len(returns) == 0:
        raise ValueError("empty batch")
    mse = critic.regress(states, actions, returns, lr)
    return critic, mse


def _channel_values(traj: Trajectory, channel) -> np.ndarray:
    if channel == TASK:
        return traj.rewards()
    return traj.flags()[:, channel].astype(float)


def _stack_states(states):
    if len(states) and isinstance(states[0], np.ndarray):
        return np.stack(states)
    return np.asarray(states)


def transitions(trajectories: Sequence[Trajectory], channel):
    """SARSA tuples ``(s, a, r, s', a', done)`` for one channel.

    The last step of a truncated trajectory has no successor action and is skipped.
    """
    S, A, R, S2, A2, D = [], [], [], [], [], []
    for tr in trajectories:
        vals = _channel_values(tr, channel)
        T = len(tr)
        for t, st in enumerate(tr.steps):
            last = t == T - 1
            if last and not tr.terminal:
                continue
            S.append(st.state)
            A.append(st.action)
            R.append(vals[t])
            if last:
                S2.append(st.next_state)
                A2.append(st.action)
                D.append(1.0)
            else:
                S2.append(tr.steps[t + 1].state)
                A2.append(tr.steps[t + 1].action)
                D.append(0.0)
    return (_stack_states(S), _stack_states(A), np.asarray(R, dtype=float),
            _stack_states(S2), _stack_states(A2), np.asarray(D, dtype=float))


def train_critic(critic: Critic, trajectories: Sequence[Trajectory], channel, discount: float,
                 cfg: CriticTrainConfig, rng: np.random.Generator | None = None) -> float:
    """Fit one critic to one channel; returns the mean pre-step loss over minibatches."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if cfg.optimizer == "adam" and hasattr(critic, "use_adam"):
        critic.use_adam()
    if cfg.method == "monte_carlo":
        S, A, Y = [], [], []
        for tr in trajectories:
            ret = discounted_return(tr, channel, discount)
            for st, g in zip(tr.steps, ret):
                S.append(st.state)
                A.append(st.action)
                Y.append(g)
        S, A, Y = _stack_states(S), _stack_states(A), np.asarray(Y)
        n = len(Y)
        if n == 0:
            return 0.0
        losses = []
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for k in range(0, n, cfg.batch_size):
                idx = order[k:k + cfg.batch_size]
                losses.append(critic.regress(S[idx], A[idx], Y[idx], cfg.learning_rate))
        return float(np.mean(losses))

    S, A, R, S2, A2, D = transitions(trajectories, channel)
    n = len(R)
    if n == 0:
        return 0.0
    target_net = copy.deepcopy(critic) if cfg.target_update is not None else None
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for k in range(0, n, cfg.batch_size):
            idx = order[k:k + cfg.batch_size]
            boot_src = target_net if target_net is not None else critic
            boot = boot_src.value(S2[idx], A2[idx]) * (1.0 - D[idx])
            y = R[idx] + discount * boot
            losses.append(critic.regress(S[idx], A[idx], y, cfg.learning_rate))
            if target_net is not None:
                tau = cfg.target_update
                target_net.set_values((1 - tau) * target_net.params.values + tau * critic.params.values)
    return float(np.mean(losses))


def train_task_critic(critic_set: CriticSet, trajectories, gamma: float, cfg: CriticTrainConfig, rng=None) -> float:
    return train_critic(critic_set.task_critic, trajectories, TASK, gamma, cfg, rng)


def train_safety_critics(critic_set: CriticSet, trajectories: Sequence[Trajectory], gammas: Sequence[float],
                         cfg: CriticTrainConfig, rng=None) -> list[float]:
    """Train safety critic ``i`` on flag channel ``i`` only, with its own discount."""
    n = critic_set.n_constraints
    if len(gammas) != n:
        raise ValueError(f"{len(gammas)} discounts for {n} safety critics")
    for tr in trajectories:
        if tr.n_constraints != n:
            raise ValueError(f"trajectory carries {tr.n_constraints} constraint channels, critic set has {n}")
    rng = rng if rng is not None else np.random.default_rng(0)
    # one shared shuffle seed keeps training independent of constraint order
    seed = int(rng.integers(0, 2**31))
    losses = []
    for i, (critic, g) in enumerate(zip(critic_set.safety_critics, gammas)):
        losses.append(train_critic(critic, trajectories, i, g, cfg, np.random.default_rng(seed)))
    return losses
