"""Training loop shared by all methods.

One iteration: collect rollouts (through the safety layer for the recovery
methods) -> update critics -> task-policy step -> recovery-policy step.

Rollouts are stepped in lockstep across environment instances so that model
evaluations are batched; each instance still draws from its own seeded stream
in the same order as :func:`objsupp.core.sample_trajectory`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algos import (
    SampleBatch,
    SuppressionConfig,
    expected_action_batch,
    recovery_gradient,
    reward_penalty_gradient,
    suppression_gradient,
    suppression_terms,
    task_policy_gradient,
)
from .approx import CriticSet, Policy, make_optimizer
from .core import RECOVERY, TASK, Step, Trajectory, rollout_streams
from .critics import CriticTrainConfig, train_safety_critics, train_task_critic

METHODS = ("suppression", "suppression+recovery", "recovery", "reward_penalty")


def derive_seed(master: int, *labels) -> int:
    """Stable per-component seed from a master seed and a label path."""
    tag = zlib.crc32("/".join(str(x) for x in labels).encode())
    return int(np.random.SeedSequence([int(master) & 0xFFFFFFFF, tag]).generate_state(1)[0])


def uses_safety_layer(method: str) -> bool:
    return method in ("suppression+recovery", "recovery")


@dataclass(frozen=True)
class TrainConfig:
    method: str = "suppression+recovery"
    iterations: int = 100
    rollouts_per_iter: int = 16
    horizon: int = 50
    gamma: float = 0.95
    gamma_c: tuple = (0.9, 0.9)
    suppression: SuppressionConfig = field(default_factory=SuppressionConfig)
    critic: CriticTrainConfig = field(default_factory=CriticTrainConfig)
    optimizer: str = "sgd"
    recovery_lr: float | None = None
    # objective weights of the recovery policy and of the penalty baseline; default: suppression.weights
    recovery_weights: tuple | None = None
    penalty_weights: tuple | None = None
    action_samples: int = 8
    # iterations that update critics only, before the first policy step
    critic_warmup: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.iterations < 0 or self.rollouts_per_iter < 1 or self.horizon < 1:
            raise ValueError("iterations >= 0, rollouts_per_iter >= 1 and horizon >= 1 required")
        if self.critic_warmup < 0 or self.action_samples < 1:
            raise ValueError("critic_warmup >= 0 and action_samples >= 1 required")


def _as_state(x):
    if isinstance(x, np.ndarray) and x.ndim == 0:
        return x.item()
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def collect_lockstep(env_factory: Callable, task_policy: Policy, seeds: Sequence[int], horizon: int,
                     critic_set: CriticSet | None = None, epsilon: float = 0.0,
                     recovery_policy: Policy | None = None, log: list | None = None) -> list[Trajectory]:
    """Roll out one episode per seed, batching policy and critic evaluations across episodes.

    With ``recovery_policy`` given, proposals whose safety value exceeds
    ``epsilon`` for any constraint are replaced by recovery actions. ``log``
    collects ``(state, proposal, critic values, layer)`` for every decision.
    """
    seeds = sorted(int(s) for s in seeds)
    layered = recovery_policy is not None
    if layered and critic_set is None:
        raise ValueError("the safety layer needs a critic set")
    envs, rngs, states, steps = [], [], [], []
    for s in seeds:
        env = env_factory()
        env_seed, rng = rollout_streams(s)
        envs.append(env)
        rngs.append(rng)
        states.append(env.reset(env_seed))
        steps.append([])
    alive = list(range(len(seeds)))
    terminal = [False] * len(seeds)
    for _ in range(horizon):
        if not alive:
            break
        S = _stack([states[k] for k in alive])
        R = [rngs[k] for k in alive]
        proposals = task_policy.batch_sample(S, R)
        actions = proposals.copy()
        layers = np.array([TASK] * len(alive), dtype=object)
        if layered:
            q = critic_set.q_safety(S, proposals)
            if not np.all(np.isfinite(q)):
                raise ValueError("non-finite safety critic output")
            unsafe = np.any(q > epsilon, axis=1)
            if np.any(unsafe):
                ui = np.nonzero(unsafe)[0]
                actions[ui] = recovery_policy.batch_sample(S[ui], [R[j] for j in ui])
                layers[ui] = RECOVERY
            if log is not None:
                for j, k in enumerate(alive):
                    log.append((states[k], proposals[j], q[j].copy(), layers[j]))
        logp = np.empty(len(alive))
        task_idx = np.nonzero(layers == TASK)[0]
        if len(task_idx):
            logp[task_idx] = task_policy.log_probs(S[task_idx], actions[task_idx])
        rec_idx = np.nonzero(layers == RECOVERY)[0]
        if len(rec_idx):
            logp[rec_idx] = recovery_policy.log_probs(S[rec_idx], actions[rec_idx])
        still = []
        for j, k in enumerate(alive):
            a = _as_state(actions[j])
            nxt, reward, flags, done = envs[k].step(a)
            steps[k].append(Step(states[k], a, nxt, float(reward), tuple(int(f) for f in flags), float(logp[j]),
                                 str(layers[j])))
            states[k] = nxt
            if done:
                terminal[k] = True
            else:
                still.append(k)
        alive = still
    return [Trajectory(tuple(steps[k]), terminal[k], seeds[k]) for k in range(len(seeds))]


def _stack(xs):
    if isinstance(xs[0], np.ndarray):
        return np.stack(xs)
    return np.asarray(xs)


def visited_states(trajectories: Sequence[Trajectory]):
    return _stack([st.state for tr in trajectories for st in tr.steps])


@dataclass
class Agent:
    task_policy: Policy
    critic_set: CriticSet
    recovery_policy: Policy | None = None
    task_opt: object = None
    recovery_opt: object = None


def summarize_rollouts(trajectories: Sequence[Trajectory], n_constraints: int) -> dict:
    """Mean episode return, per-episode violation means and recovery-layer usage."""
    if not trajectories:
        return {"episodes": 0, "task_return_mean": None, "violations": [None] * n_constraints,
                "recovery_fraction": None}
    returns = np.array([tr.total_reward() for tr in trajectories])
    viol = np.array([tr.violation_counts() for tr in trajectories]).reshape(len(trajectories), n_constraints)
    n_steps = sum(len(tr) for tr in trajectories)
    n_rec = sum(st.layer == RECOVERY for tr in trajectories for st in tr.steps)
    return {
        "episodes": len(trajectories),
        "task_return_mean": float(returns.mean()),
        "violations": [float(v) for v in viol.mean(axis=0)],
        "recovery_fraction": float(n_rec / n_steps),
    }


def train_step_combined(env_factory: Callable, agent: Agent, cfg: TrainConfig, iteration: int, seed: int) -> dict:
    """One training iteration; returns the metrics record for that iteration."""
    layered = uses_safety_layer(cfg.method)
    if layered and agent.recovery_policy is None:
        raise ValueError(f"method {cfg.method!r} needs a recovery policy")
    sup = cfg.suppression
    n = agent.critic_set.n_constraints
    if agent.task_opt is None:
        agent.task_opt = make_optimizer(cfg.optimizer, len(agent.task_policy.params), sup.policy_lr)
    if layered and agent.recovery_opt is None:
        lr = cfg.recovery_lr if cfg.recovery_lr is not None else sup.policy_lr
        agent.recovery_opt = make_optimizer(cfg.optimizer, len(agent.recovery_policy.params), lr)

    # 1. rollouts against frozen snapshots
    critics = agent.critic_set.snapshot()
    seeds = [derive_seed(seed, "rollout", iteration, k) for k in range(cfg.rollouts_per_iter)]
    trajs = collect_lockstep(env_factory, agent.task_policy.snapshot(), seeds, cfg.horizon, critics, sup.epsilon,
                             agent.recovery_policy.snapshot() if layered else None)
    executed = SampleBatch.from_trajectories(trajs)
    p_minus_exec, _, _ = suppression_terms(critics.q_safety(executed.states, executed.actions), sup)

    # 2. critics (shared replay: both layers' transitions train every critic)
    crng = np.random.default_rng(derive_seed(seed, "critic", iteration))
    train_task_critic(agent.critic_set, trajs, cfg.gamma, cfg.critic, crng)
    train_safety_critics(agent.critic_set, trajs, list(cfg.gamma_c), cfg.critic, crng)
    critics = agent.critic_set.snapshot()
    summary = summarize_rollouts(trajs, n)
    record = {
        "iter": int(iteration),
        "task_return_mean": summary["task_return_mean"],
        "violations": [int(v) for v in np.sum([tr.violation_counts() for tr in trajs], axis=0)],
        "p_minus_mean": float(np.mean(p_minus_exec)),
        "recovery_fraction": summary["recovery_fraction"],
        "grad_norms": {"task": 0.0, "recovery": 0.0},
    }
    if iteration < cfg.critic_warmup:
        return record

    # 3. task policy on every visited state
    states = visited_states(trajs)
    brng = np.random.default_rng(derive_seed(seed, "minibatch", iteration))
    batch = expected_action_batch(states, agent.task_policy, brng, cfg.action_samples)
    if cfg.method in ("suppression", "suppression+recovery"):
        g = suppression_gradient(batch, agent.task_policy, critics, sup)
    elif cfg.method == "reward_penalty":
        g = reward_penalty_gradient(batch, agent.task_policy, critics, cfg.penalty_weights or sup.weights,
                                    sup.normalize_advantage, sup.state_baseline)
    else:
        g = task_policy_gradient(batch, agent.task_policy, critics, sup.normalize_advantage, sup.state_baseline)
    agent.task_policy.set_values(agent.task_policy.params.values + agent.task_opt.direction(g.values))
    grad_norms = record["grad_norms"]
    grad_norms["task"] = float(np.linalg.norm(g.values))

    # 4. recovery policy
    if layered:
        rcfg = sup
        if cfg.recovery_weights is not None:
            rcfg = SuppressionConfig(**{**sup.__dict__, "weights": tuple(cfg.recovery_weights)})
        rbatch = expected_action_batch(states, agent.recovery_policy, brng, cfg.action_samples)
        rg = recovery_gradient(rbatch, agent.recovery_policy, critics, rcfg,
                               suppress=cfg.method == "suppression+recovery")
        agent.recovery_policy.set_values(agent.recovery_policy.params.values + agent.recovery_opt.direction(rg.values))
        grad_norms["recovery"] = float(np.linalg.norm(rg.values))
    return record


def train(env_factory: Callable, agent: Agent, cfg: TrainConfig, seed: int, iterations: int | None = None,
          callback: Callable[[dict], None] | None = None) -> list[dict]:
    """Run ``iterations`` (default ``cfg.iterations``) combined steps; returns the metrics records."""
    records = []
    for it in range(cfg.iterations if iterations is None else iterations):
        rec = train_step_combined(env_factory, agent, cfg, it, seed)
        records.append(rec)
        if callback is not None:
            callback(rec)
    return records


def evaluate(env_factory: Callable, agent: Agent, method: str, episodes: int, horizon: int, seed: int,
             epsilon: float, log: list | None = None) -> dict:
    """Fresh evaluation rollouts with the method's execution rule; per-episode means."""
    if episodes <= 0:
        return summarize_rollouts([], agent.critic_set.n_constraints)
    seeds = [derive_seed(seed, "eval", k) for k in range(episodes)]
    layered = uses_safety_layer(method)
    trajs = collect_lockstep(env_factory, agent.task_policy, seeds, horizon, agent.critic_set, epsilon,
                             agent.recovery_policy if layered else None, log)
    return summarize_rollouts(trajs, agent.critic_set.n_constraints)
