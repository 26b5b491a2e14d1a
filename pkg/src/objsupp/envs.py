"""Desk-scale multi-constraint environments.

Constraint index 0 is always the collision-like channel and index 1 the
bounds/collapse-like channel.

``HazardGrid``: hazards are non-terminal (a non-halting risk), pits end the
episode. States are row-major cell indices, so the grid can be exported as an
exact :class:`~objsupp.core.CmdpSpec`.

``PointNav2D``: a point robot with velocity control among moving discs;
touching a disc ends the episode, hugging the workspace edge is flagged but
does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CmdpSpec, ConstraintSpec

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}
ACTION_NAMES = {"up": UP, "down": DOWN, "left": LEFT, "right": RIGHT}


@dataclass(frozen=True)
class HazardGridConfig:
    width: int
    height: int
    goal_cell: tuple[int, int]
    hazard_cells: frozenset = frozenset()
    pit_cells: frozenset = frozenset()
    slip_prob: float = 0.0
    step_reward: float = -0.1
    goal_reward: float = 10.0
    max_steps: int = 50
    start_cell: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "goal_cell", tuple(self.goal_cell))
        object.__setattr__(self, "start_cell", tuple(self.start_cell))
        object.__setattr__(self, "hazard_cells", frozenset(tuple(c) for c in self.hazard_cells))
        object.__setattr__(self, "pit_cells", frozenset(tuple(c) for c in self.pit_cells))
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ValueError(f"slip_prob must lie in [0, 1), got {self.slip_prob}")
        for c in {self.goal_cell, self.start_cell} | self.hazard_cells | self.pit_cells:
            if not self.in_bounds(c):
                raise ValueError(f"cell {c} is outside the {self.width}x{self.height} grid")
        if self.goal_cell in self.hazard_cells | self.pit_cells:
            raise ValueError("goal cell may not be a hazard or a pit")
        if self.start_cell in self.pit_cells or self.start_cell == self.goal_cell:
            raise ValueError("start cell may not be terminal")

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_terminal(self, cell) -> bool:
        return cell == self.goal_cell or cell in self.pit_cells


def enumerate_states(cfg: HazardGridConfig) -> tuple[list[tuple[int, int]], dict[tuple[int, int], int]]:
    """All cells in row-major order and the inverse index map."""
    cells = [(x, y) for y in range(cfg.height) for x in range(cfg.width)]
    return cells, {c: i for i, c in enumerate(cells)}


def _move(cfg: HazardGridConfig, cell, action: int):
    dx, dy = MOVES[action]
    nxt = (cell[0] + dx, cell[1] + dy)
    return nxt if cfg.in_bounds(nxt) else cell


def apply_slip(cfg: HazardGridConfig, action: int, rng: np.random.Generator) -> tuple[int, bool]:
    """With probability ``slip_prob`` replace the action by a uniformly random one."""
    if cfg.slip_prob > 0 and rng.random() < cfg.slip_prob:
        return int(rng.integers(4)), True
    return action, False


def grid_reset(cfg: HazardGridConfig, seed=None):
    return cfg.start_cell


def grid_step(cfg: HazardGridConfig, state, action, rng: np.random.Generator | None = None):
    """One transition from cell ``state``; returns (next_cell, reward, flags, done)."""
    state = tuple(state)
    if not cfg.in_bounds(state):
        raise ValueError(f"state {state} is out of bounds")
    if action not in MOVES:
        raise ValueError(f"invalid action {action!r}")
    if rng is None:
        rng = np.random.default_rng()
    action, _ = apply_slip(cfg, int(action), rng)
    nxt = _move(cfg, state, action)
    reward = cfg.step_reward + (cfg.goal_reward if nxt == cfg.goal_cell else 0.0)
    flags = (int(nxt in cfg.hazard_cells), int(nxt in cfg.pit_cells))
    done = cfg.is_terminal(nxt)
    return nxt, reward, flags, done


class HazardGrid:
    """Stateful grid environment over integer state indices."""

    n_constraints = 2
    n_actions = 4

    def __init__(self, cfg: HazardGridConfig):
        self.cfg = cfg
        self.cells, self.index = enumerate_states(cfg)
        self.n_states = len(self.cells)
        self._cell = cfg.start_cell
        self._rng = np.random.default_rng(0)

    def reset(self, seed: int = 0) -> int:
        self._rng = np.random.default_rng(seed)
        self._cell = grid_reset(self.cfg, seed)
        return self.index[self._cell]

    def step(self, action):
        nxt, reward, flags, done = grid_step(self.cfg, self._cell, int(action), self._rng)
        self._cell = nxt
        return self.index[nxt], reward, flags, done


def grid_to_cmdp(
    cfg: HazardGridConfig,
    gamma: float = 0.95,
    gamma_c=(0.9, 0.9),
    weights=(1.0, 1.0),
    epsilon: float = 0.1,
) -> CmdpSpec:
    """Exact CMDP of the grid.

    One absorbing sink state (index ``width*height``) is appended; goal and pit
    cells move to it with zero reward, so infinite-horizon values equal the
    episodic ones.
    """
    cells, index = enumerate_states(cfg)
    n = len(cells)
    S, A = n + 1, 4
    sink = n
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    for s, cell in enumerate(cells):
        if cfg.is_terminal(cell):
            P[s, :, sink] = 1.0
            continue
        for a in range(A):
            eff = {b: cfg.slip_prob / 4.0 for b in range(A)}
            eff[a] += 1.0 - cfg.slip_prob
            for b, pb in eff.items():
                if pb == 0.0:
                    continue
                nxt = _move(cfg, cell, b)
                s2 = index[nxt]
                P[s, a, s2] += pb
                R[s, a, s2] = cfg.step_reward + (cfg.goal_reward if nxt == cfg.goal_cell else 0.0)
    P[sink, :, sink] = 1.0
    mu0 = np.zeros(S)
    mu0[index[cfg.start_cell]] = 1.0
    hazard_idx = frozenset(index[c] for c in cfg.hazard_cells)
    pit_idx = frozenset(index[c] for c in cfg.pit_cells)
    constraints = (
        ConstraintSpec(lambda s, h=hazard_idx: int(s in h), gamma_c[0], weights[0], "hazard"),
        ConstraintSpec(lambda s, p=pit_idx: int(s in p), gamma_c[1], weights[1], "pit"),
    )
    return CmdpSpec(P, R, gamma, constraints, epsilon, mu0)


# ---------------------------------------------------------------------------
# continuous navigation


@dataclass(frozen=True)
class Obstacle:
    """Disc whose centre oscillates along ``amplitude`` with the given period (seconds)."""

    center: tuple[float, float]
    radius: float
    amplitude: tuple[float, float] = (0.0, 0.0)
    period: float = 1.0
    phase: float = 0.0

    def position(self, time: float) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        if self.period <= 0:
            return c
        return c + np.asarray(self.amplitude) * math.sin(2 * math.pi * time / self.period + self.phase)


@dataclass(frozen=True)
class PointNav2DConfig:
    workspace: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 4.0)  # xmin, ymin, xmax, ymax
    start: tuple[float, float] = (0.5, 2.0)
    goal: tuple[float, float] = (9.5, 2.0)
    goal_radius: float = 0.4
    obstacles: tuple[Obstacle, ...] = ()
    boundary_margin: float = 0.5
    dt: float = 0.2
    max_speed: float = 1.0
    max_steps: int = 100
    time_penalty: float = 0.01
    progress_scale: float = 1.0
    goal_reward: float = 5.0
    start_jitter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(
            o if isinstance(o, Obstacle) else Obstacle(**o) for o in self.obstacles))
        xmin, ymin, xmax, ymax = self.workspace
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("workspace must have positive extent")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_speed <= 0 or self.goal_radius <= 0:
            raise ValueError("max_speed and goal_radius must be positive")
        if any(o.radius <= 0 for o in self.obstacles):
            raise ValueError("obstacle radii must be positive")
        if not (xmin <= self.goal[0] <= xmax and ymin <= self.goal[1] <= ymax):
            raise ValueError("goal must lie inside the workspace")


@dataclass(frozen=True)
class NavState:
    pos: np.ndarray
    t: int = 0


def nav_reset(cfg: PointNav2DConfig, seed: int = 0) -> NavState:
    pos = np.asarray(cfg.start, dtype=float).copy()
    if cfg.start_jitter > 0:
        rng = np.random.default_rng(seed)
        pos = pos + rng.uniform(-cfg.start_jitter, cfg.start_jitter, size=2)
    return NavState(pos=pos, t=0)


def _clip_speed(cfg: PointNav2DConfig, action) -> np.ndarray:
    v = np.asarray(action, dtype=float).reshape(2)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite action {action!r}")
    speed = float(np.hypot(v[0], v[1]))
    if speed > cfg.max_speed:
        v = v * (cfg.max_speed / speed)
    return v


def nav_flags(cfg: PointNav2DConfig, pos: np.ndarray, t: int) -> tuple[int, int]:
    time = t * cfg.dt
    hit = any(np.hypot(*(pos - o.position(time))) <= o.radius for o in cfg.obstacles)
    xmin, ymin, xmax, ymax = cfg.workspace
    m = cfg.boundary_margin
    near_edge = pos[0] < xmin + m or pos[0] > xmax - m or pos[1] < ymin + m or pos[1] > ymax - m
    return int(hit), int(near_edge)


def nav_step(cfg: PointNav2DConfig, state: NavState, action):
    """Integrate a velocity command for one ``dt``; returns (next_state, reward, flags, done)."""
    v = _clip_speed(cfg, action)
    xmin, ymin, xmax, ymax = cfg.workspace
    goal = np.asarray(cfg.goal, dtype=float)
    pos = state.pos + v * cfg.dt
    pos = np.clip(pos, [xmin, ymin], [xmax, ymax])
    t = state.t + 1
    d_prev = float(np.hypot(*(state.pos - goal)))
    d_new = float(np.hypot(*(pos - goal)))
    reward = cfg.progress_scale * (d_prev - d_new) - cfg.time_penalty
    flags = nav_flags(cfg, pos, t)
    reached = d_new <= cfg.goal_radius
    if reached:
        reward += cfg.goal_reward
    done = bool(flags[0]) or reached
    return NavState(pos=pos, t=t), reward, flags, done


def nav_observation(cfg: PointNav2DConfig, state: NavState) -> np.ndarray:
    """Features of order one.

    Position and offsets are scaled by the workspace half-extents; obstacle
    surface distance and the four edge clearances are measured in boundary
    margins and clipped to [-1, 3] and [0, 3].
    """
    xmin, ymin, xmax, ymax = cfg.workspace
    half = np.array([xmax - xmin, ymax - ymin]) / 2.0
    centre = np.array([xmin, ymin]) + half
    unit = cfg.boundary_margin if cfg.boundary_margin > 0 else 1.0
    pos = state.pos
    goal = np.asarray(cfg.goal, dtype=float)
    time = state.t * cfg.dt
    feats = [(pos - centre) / half, (goal - pos) / half]
    for o in cfg.obstacles:
        rel = o.position(time) - pos
        vel = (o.position(time + cfg.dt) - o.position(time)) / cfg.dt
        gap = (float(np.hypot(*rel)) - o.radius) / unit
        feats.append(rel / half)
        feats.append(vel / cfg.max_speed)
        feats.append([np.clip(gap, -1.0, 3.0)])
    clear = np.array([pos[0] - xmin, xmax - pos[0], pos[1] - ymin, ymax - pos[1]]) / unit
    feats.append(np.clip(clear, 0.0, 3.0))
    return np.concatenate([np.asarray(f, dtype=float).ravel() for f in feats])


class PointNav2D:
    """Stateful navigation environment emitting feature observations."""

    n_constraints = 2

    def __init__(self, cfg: PointNav2DConfig):
        self.cfg = cfg
        self.state = nav_reset(cfg)
        self.obs_dim = nav_observation(cfg, self.state).shape[0]
        self.act_dim = 2

    def reset(self, seed: int = 0) -> np.ndarray:
        self.state = nav_reset(self.cfg, seed)
        return nav_observation(self.cfg, self.state)

    def step(self, action):
        # the time limit is a truncation handled by the rollout horizon
        self.state, reward, flags, done = nav_step(self.cfg, self.state, action)
        return nav_observation(self.cfg, self.state), reward, flags, done
