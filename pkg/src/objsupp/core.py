"""Domain types for constrained MDPs, rollouts and hindsight risk indicators.

Conventions used throughout the package:

* a step record ``t`` holds ``(s_t, a_t, s_{t+1})`` and the constraint flags of
  the *entered* state ``s_{t+1}``; this is what the environments emit and what
  the oracle credits (``C_i(s')`` on the transition into ``s'``).
* trajectories are truncated at the rollout horizon.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Protocol, Sequence

import numpy as np

TASK = "task"
RECOVERY = "recovery"


@dataclass(frozen=True)
class ConstraintSpec:
    """One risk channel: a binary state indicator and its discount."""

    indicator: Callable[[int], int]
    gamma_c: float
    weight: float = 1.0
    name: str = ""


@dataclass(frozen=True, eq=False)
class CmdpSpec:
    """Finite constrained MDP.

    ``transition`` and ``reward`` are indexed ``[s, a, s']``.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    constraints: tuple[ConstraintSpec, ...]
    epsilon: float
    initial_dist: np.ndarray

    @property
    def state_count(self) -> int:
        return self.transition.shape[0]

    @property
    def action_count(self) -> int:
        return self.transition.shape[1]

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def constraint_table(self, i: int) -> np.ndarray:
        """``C_i`` evaluated on every state, as a float vector."""
        ind = self.constraints[i].indicator
        return np.array([ind(s) for s in range(self.state_count)], dtype=float)

    def constraint_gamma(self, i: int) -> float:
        return self.constraints[i].gamma_c


def validate_cmdp(spec: CmdpSpec) -> list[str]:
    """Return a list of violated invariants; empty means the model is valid."""
    problems = []
    P = np.asarray(spec.transition, dtype=float)
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        problems.append(f"transition must have shape (S, A, S), got {P.shape}")
        return problems
    S, A, _ = P.shape
    R = np.asarray(spec.reward)
    if R.shape != P.shape:
        problems.append(f"reward shape {R.shape} does not match transition shape {P.shape}")
    elif not np.all(np.isfinite(R)):
        problems.append("reward contains non-finite entries")
    if np.any(P < 0):
        problems.append("transition has negative entries")
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)
    for s, a in bad[:10]:
        problems.append(f"transition row P[{s}][{a}] sums to {sums[s, a]:.12g}, not 1")
    mu = np.asarray(spec.initial_dist, dtype=float)
    if mu.shape != (S,):
        problems.append(f"initial_dist must have length {S}, got shape {mu.shape}")
    else:
        if np.any(mu < 0):
            problems.append("initial_dist has negative entries")
        if abs(mu.sum() - 1.0) > 1e-9:
            problems.append(f"initial_dist sums to {mu.sum():.12g}, not 1")
    if not 0.0 < spec.gamma < 1.0:
        problems.append(f"discount gamma={spec.gamma} must lie strictly inside (0, 1)")
    if not spec.epsilon >= 0:
        problems.append(f"epsilon={spec.epsilon} must be nonnegative")
    for i, c in enumerate(spec.constraints):
        label = c.name or str(i)
        if not 0.0 < c.gamma_c < 1.0:
            problems.append(f"constraint {label}: discount gamma_c={c.gamma_c} must lie strictly inside (0, 1)")
        if c.weight < 0:
            problems.append(f"constraint {label}: weight {c.weight} is negative")
        vals = {c.indicator(s) for s in range(S)}
        if not vals <= {0, 1}:
            problems.append(f"constraint {label}: indicator returns values outside {{0, 1}}: {sorted(vals - {0, 1})}")
    return problems


@dataclass(frozen=True)
class Step:
    state: Any
    action: Any
    next_state: Any
    reward: float
    flags: tuple[int, ...]
    log_prob: float
    layer: str = TASK


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[Step, ...]
    terminal: bool
    seed: int

    def __post_init__(self):
        if len(self.steps) == 0:
            raise ValueError("trajectory must contain at least one step")
        for t, st in enumerate(self.steps):
            if any(f not in (0, 1) for f in st.flags):
                raise ValueError(f"step {t}: constraint flags must be 0/1, got {st.flags}")
            if not math.isfinite(st.log_prob):
                raise ValueError(f"step {t}: log_prob is not finite")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n_constraints(self) -> int:
        return len(self.steps[0].flags)

    def flags(self) -> np.ndarray:
        """Constraint flags as an int array of shape (T, n)."""
        return np.array([st.flags for st in self.steps], dtype=int).reshape(len(self.steps), -1)

    def rewards(self) -> np.ndarray:
        return np.array([st.reward for st in self.steps], dtype=float)

    def total_reward(self) -> float:
        return float(sum(st.reward for st in self.steps))

    def violation_counts(self) -> np.ndarray:
        return self.flags().sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "terminal": bool(self.terminal),
            "steps": [
                {
                    "state": _to_jsonable(st.state),
                    "action": _to_jsonable(st.action),
                    "next_state": _to_jsonable(st.next_state),
                    "reward": float(st.reward),
                    "flags": [int(f) for f in st.flags],
                    "log_prob": float(st.log_prob),
                    "layer": st.layer,
                }
                for st in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        steps = tuple(
            Step(
                state=_from_jsonable(s["state"]),
                action=_from_jsonable(s["action"]),
                next_state=_from_jsonable(s["next_state"]),
                reward=float(s["reward"]),
                flags=tuple(int(f) for f in s["flags"]),
                log_prob=float(s["log_prob"]),
                layer=s.get("layer", TASK),
            )
            for s in d["steps"]
        )
        return cls(steps=steps, terminal=bool(d["terminal"]), seed=int(d["seed"]))


def _to_jsonable(x):
    if isinstance(x, np.ndarray):
        return [float(v) for v in x.ravel()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def _from_jsonable(x):
    if isinstance(x, list):
        return np.array(x, dtype=float)
    return x


def dump_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    """Write one JSON record per line."""
    with open(path, "w") as fh:
        for tr in trajectories:
            fh.write(json.dumps(tr.to_dict()) + "\n")


def load_trajectories(path) -> list[Trajectory]:
    with open(path) as fh:
        return [Trajectory.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass(frozen=True)
class RiskIndicators:
    chi: np.ndarray  # (T, n)
    chi_bar: np.ndarray  # (T,)


def compute_risk_indicators(traj: Trajectory, include_current: bool = True) -> RiskIndicators:
    """Hindsight indicators of whether risk ``i`` is met after step ``t``.

    Flags of step ``t`` belong to the state entered by ``a_t``, so by default a
    flag at step ``t`` counts for ``chi[t]``: the risk is encountered in a state
    strictly after ``s_t``. With ``include_current=False`` only flags of steps
    ``t' > t`` count.
    """
    F = traj.flags()
    # reverse running "any": suffix[t] = any(F[t:])
    suffix = np.maximum.accumulate(F[::-1], axis=0)[::-1]
    if include_current:
        chi = suffix.copy()
    else:
        chi = np.zeros_like(suffix)
        chi[:-1] = suffix[1:]
    chi_bar = np.prod(1 - chi, axis=1)
    return RiskIndicators(chi=chi.astype(int), chi_bar=chi_bar.astype(int))


def discounted_return(traj: Trajectory, channel: str | int, discount: float) -> np.ndarray:
    """Per-step discounted returns of the task reward or a constraint channel."""
    if not 0.0 < discount < 1.0:
        raise ValueError(f"discount must lie in (0, 1), got {discount}")
    if channel == TASK:
        values = traj.rewards()
    elif isinstance(channel, (int, np.integer)) and 0 <= channel < traj.n_constraints:
        values = traj.flags()[:, channel].astype(float)
    else:
        raise ValueError(f"unknown channel {channel!r}")
    out = np.empty_like(values)
    acc = 0.0
    for t in range(len(values) - 1, -1, -1):
        acc = values[t] + discount * acc
        out[t] = acc
    return out


class Environment(Protocol):
    n_constraints: int

    def reset(self, seed: int): ...

    def step(self, action) -> tuple[Any, float, tuple[int, ...], bool]: ...


class RolloutError(RuntimeError):
    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


def rollout_streams(seed: int) -> tuple[int, np.random.Generator]:
    """Split a rollout seed into an environment seed and an action generator."""
    env_ss, act_ss = np.random.SeedSequence(seed).spawn(2)
    return int(env_ss.generate_state(1)[0]), np.random.default_rng(act_ss)


def sample_trajectory(env, policy, safety_layer=None, horizon: int = 100, rng_seed: int = 0) -> Trajectory:
    """Roll out ``policy`` (optionally filtered by ``safety_layer``) for up to ``horizon`` steps.

    The same seed and parameter snapshot always give the same trajectory.
    ``safety_layer`` must provide ``select(state, rng) -> (action, layer, log_prob)``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    env_seed, rng = rollout_streams(rng_seed)
    state = env.reset(env_seed)
    steps = []
    terminal = False
    for t in range(horizon):
        if safety_layer is None:
            action = policy.sample(state, rng)
            layer, logp = TASK, policy.log_prob(state, action)
        else:
            action, layer, logp = safety_layer.select(state, rng)
        try:
            next_state, reward, flags, done = env.step(action)
        except Exception as exc:
            raise RolloutError(f"environment step failed at step {t}: {exc}", t) from exc
        steps.append(Step(state, action, next_state, float(reward), tuple(int(f) for f in flags), float(logp), layer))
        state = next_state
        if done:
            terminal = True
            break
    return Trajectory(steps=tuple(steps), terminal=terminal, seed=int(rng_seed))


def collect_rollouts(
    env_factory: Callable[[], Any],
    policy,
    seeds: Sequence[int],
    safety_layer=None,
    horizon: int = 100,
    max_workers: int = 1,
) -> list[Trajectory]:
    """Collect one trajectory per seed, each on a fresh environment instance.

    The result is ordered by ascending seed whatever the scheduling.
    """

    def one(seed):
        return sample_trajectory(env_factory(), policy, safety_layer, horizon, seed)

    ordered = sorted(int(s) for s in seeds)
    if max_workers <= 1:
        return [one(s) for s in ordered]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, ordered))
