"""Property suites comparing sample estimators against exact tabular answers.

Each check returns a :class:`CheckResult` holding the measured error, the
tolerance it is judged against and a few diagnostic numbers. The suites never
raise on failure; a failed property is a report entry.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .algos import (
    SampleBatch,
    SuppressionConfig,
    hard_switch_gradient,
    reward_penalty_gradient,
    suppression_gradient,
    suppression_gradient_r_form,
    task_policy_gradient,
)
from .approx import (
    CriticSet,
    MLPCategoricalPolicy,
    MLPCritic,
    SquashedGaussianPolicy,
    TabularCritic,
    TabularSoftmaxPolicy,
    finite_diff_check,
)
from .core import TASK, CmdpSpec, ConstraintSpec, Step, Trajectory
from .oracle import (
    DualTable,
    EnumerationBudgetError,
    dual_update,
    enumerate_risk_probabilities,
    exact_objective,
    exact_policy_evaluation,
    exact_policy_gradient,
    exact_soft_switch_gradient,
    occupancy_measure,
    safety_tables,
)

PROPERTIES = (
    "reduction",
    "rewrite_identity",
    "tower_equivalence",
    "policy_gradient",
    "approximator_gradients",
    "proxy_bound",
    "dual_monotonicity",
)


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float
    # counts pass at error <= tolerance, continuous errors at error < tolerance
    inclusive: bool = False
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.error):
            return False
        return self.error <= self.tolerance if self.inclusive else self.error < self.tolerance

    def to_dict(self) -> dict:
        return {"passed": bool(self.passed), "error": float(self.error), "tolerance": float(self.tolerance),
                "detail": self.detail}


# ---------------------------------------------------------------------------
# random instances


def random_cmdp(rng: np.random.Generator, n_states: int = 3, n_actions: int = 2, n_constraints: int = 2,
                gamma: float = 0.9, gamma_c: float = 0.8, epsilon: float = 0.1, sparsity: float = 0.0) -> CmdpSpec:
    """Random finite CMDP with 0/1 state indicators; every indicator has both values when ``n_states > 1``."""
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    if sparsity > 0:
        P = np.where(rng.random(P.shape) < sparsity, 0.0, P)
        dead = P.sum(axis=2) == 0
        P[dead, 0] = 1.0
        P /= P.sum(axis=2, keepdims=True)
    R = rng.normal(size=(n_states, n_actions, n_states))
    constraints = []
    for i in range(n_constraints):
        table = (rng.random(n_states) < 0.4).astype(int)
        if n_states > 1:
            table[rng.integers(n_states)] = 1
            table[(int(np.argmax(table)) + 1) % n_states] = 0
        constraints.append(ConstraintSpec(lambda s, t=tuple(int(v) for v in table): t[s], gamma_c, 1.0, f"c{i}"))
    mu = rng.dirichlet(np.ones(n_states))
    return CmdpSpec(P, R, gamma, tuple(constraints), epsilon, mu)


def _random_policy(rng, S, A, scale=1.0) -> TabularSoftmaxPolicy:
    pol = TabularSoftmaxPolicy(S, A)
    pol.set_values(scale * rng.normal(size=S * A))
    return pol


def _table_critics(q_task: np.ndarray, q_safety: np.ndarray) -> CriticSet:
    S, A = q_task.shape
    task = TabularCritic(S, A)
    task.set_values(np.asarray(q_task, float).ravel())
    safety = []
    for q in q_safety:
        c = TabularCritic(S, A, nonneg=True)
        c.set_values(np.asarray(q, float).ravel())
        safety.append(c)
    return CriticSet(task, safety)


def _random_batch(rng, S, A, n, grouped=False) -> SampleBatch:
    states = rng.integers(S, size=n)
    actions = rng.integers(A, size=n)
    w = rng.random(n) + 0.1
    groups = rng.integers(max(1, n // 4), size=n) if grouped else None
    return SampleBatch(states, actions, w / w.sum(), groups)


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


# ---------------------------------------------------------------------------
# suites


def check_reduction(spec: CmdpSpec, rng: np.random.Generator, corrupt: float = 0.0, n_traj: int = 8,
                    horizon: int = 6, kappa: float = 3.0, tolerance: float = 1e-12) -> CheckResult:
    """With zero constraint signals and zero safety critics every estimator is the task gradient.

    ``corrupt`` adds a constant to each safety critic, which should break the identity.
    """
    S, A, n = spec.state_count, spec.action_count, spec.n_constraints
    pol = _random_policy(rng, S, A)
    critics = _table_critics(rng.normal(scale=5.0, size=(S, A)), np.full((n, S, A), float(corrupt)))
    trajs = []
    for k in range(n_traj):
        s = rng.integers(S, size=horizon + 1)
        a = rng.integers(A, size=horizon)
        steps = tuple(Step(int(s[t]), int(a[t]), int(s[t + 1]), 0.0, (0,) * n, 0.0) for t in range(horizon))
        trajs.append(Trajectory(steps, False, k))
    batch = SampleBatch.from_trajectories(trajs)
    w = np.ones(n)
    cfg = SuppressionConfig(kappa=kappa, weights=w)
    ref = task_policy_gradient(batch, pol, critics).values
    errs = {
        "suppression": _max_abs(suppression_gradient(batch, pol, critics, cfg).values, ref),
        "hard_switch": _max_abs(hard_switch_gradient(trajs, pol, critics, w).values, ref),
        "reward_penalty": _max_abs(reward_penalty_gradient(batch, pol, critics, w).values, ref),
    }
    return CheckResult("reduction", max(errs.values()), tolerance, detail={**errs, "corrupt_offset": float(corrupt)})


def check_rewrite_identity(spec: CmdpSpec, rng: np.random.Generator, batches: int = 100, batch_size: int = 64,
                           tolerance: float = 1e-12) -> CheckResult:
    """Suppression coefficient vs its ``p_minus``-weighted Lagrangian form with ``lam_i = r_i``."""
    S, A, n = spec.state_count, spec.action_count, spec.n_constraints
    worst = 0.0
    for b in range(batches):
        pol = _random_policy(rng, S, A)
        critics = _table_critics(rng.normal(scale=5.0, size=(S, A)), rng.exponential(0.5, size=(n, S, A)))
        cfg = SuppressionConfig(kappa=float(rng.uniform(0.0, 5.0)), weights=rng.uniform(0.0, 2.0, size=n),
                                normalize_advantage=bool(b % 3 == 1), state_baseline=bool(b % 3 == 2),
                                clamp_proxy=bool(b % 2 == 0))
        batch = _random_batch(rng, S, A, batch_size, grouped=True)
        g1 = suppression_gradient(batch, pol, critics, cfg).values
        g2 = suppression_gradient_r_form(batch, pol, critics, cfg).values
        worst = max(worst, _max_abs(g1, g2))
    return CheckResult("rewrite_identity", worst, tolerance, detail={"batches": batches})


def enumerate_paths(spec: CmdpSpec, policy, horizon: int) -> tuple[list[Trajectory], np.ndarray]:
    """Every length-``horizon`` trajectory with positive probability and its probability."""
    pi = policy.prob_table()
    P = spec.transition
    tables = [spec.constraint_table(i).astype(int) for i in range(spec.n_constraints)]
    paths = [((), int(s), float(spec.initial_dist[s])) for s in range(spec.state_count) if spec.initial_dist[s] > 0]
    for _ in range(horizon):
        nxt = []
        for steps, s, p in paths:
            for a in range(spec.action_count):
                if pi[s, a] == 0:
                    continue
                for s2 in np.nonzero(P[s, a] > 0)[0]:
                    flags = tuple(int(t[s2]) for t in tables)
                    st = Step(s, a, int(s2), float(spec.reward[s, a, s2]), flags, float(np.log(pi[s, a])))
                    nxt.append((steps + (st,), int(s2), p * pi[s, a] * P[s, a, s2]))
        paths = nxt
    trajs = [Trajectory(steps, False, k) for k, (steps, _, _) in enumerate(paths)]
    return trajs, np.array([p for _, _, p in paths])


def check_tower_equivalence(spec: CmdpSpec, rng: np.random.Generator, horizon: int = 4,
                            tolerance: float = 1e-10) -> CheckResult:
    """Exact expected hindsight-switching gradient vs the soft form with enumerated risk probabilities."""
    S, A, n = spec.state_count, spec.action_count, spec.n_constraints
    pol = _random_policy(rng, S, A)
    q_task = rng.normal(scale=3.0, size=(S, A))
    q_safety = rng.exponential(0.5, size=(n, S, A))
    w = rng.uniform(0.5, 2.0, size=n)
    trajs, probs = enumerate_paths(spec, pol, horizon)
    hard = hard_switch_gradient(trajs, pol, _table_critics(q_task, q_safety), w, traj_weights=probs).values
    soft = exact_soft_switch_gradient(spec, pol, q_task, q_safety, w, horizon)
    scale = float(np.max(np.abs(soft)))
    return CheckResult("tower_equivalence", _max_abs(hard, soft), tolerance,
                       detail={"paths": len(trajs), "horizon": horizon, "gradient_scale": scale})


def check_policy_gradients(spec: CmdpSpec, rng: np.random.Generator, points: int = 10, step: float = 1e-5,
                           tolerance: float = 1e-4) -> CheckResult:
    """Occupancy-form gradient of every channel objective vs central differences of the exact objective."""
    S, A = spec.state_count, spec.action_count
    channels = [TASK] + list(range(spec.n_constraints))
    per_channel = {str(c): 0.0 for c in channels}
    for _ in range(points):
        theta = rng.normal(size=S * A)
        for c in channels:
            g_c = spec.gamma if c == TASK else spec.constraint_gamma(c)

            def fn(x, c=c, g_c=g_c):
                pol = TabularSoftmaxPolicy(S, A)
                pol.set_values(x)
                q = exact_policy_evaluation(spec, pol, c)
                grad = exact_policy_gradient(spec, pol, q, gamma=g_c).values / (1.0 - g_c)
                return exact_objective(spec, pol, c), grad

            per_channel[str(c)] = max(per_channel[str(c)], finite_diff_check(fn, theta, step))
    return CheckResult("policy_gradient", max(per_channel.values()), tolerance,
                       detail={"points": points, "per_channel": per_channel})


def _fd_family(model, states, actions, coef, rng, kind: str, step: float) -> float:
    model = copy.deepcopy(model)

    def fn(x):
        model.set_values(x)
        if kind == "policy":
            return float(np.sum(coef * model.log_probs(states, actions))), model.score_sum(states, actions, coef)
        return float(np.sum(coef * model.raw(states, actions))), model.raw_grad_sum(states, actions, coef)

    return finite_diff_check(fn, model.params.values.copy(), step)


def check_approximator_gradients(rng: np.random.Generator, step: float = 1e-5, tolerance: float = 1e-4,
                                 hidden=(8, 8)) -> CheckResult:
    """Analytic parameter gradients of every policy and critic family vs central differences."""
    n, obs, n_act, act_dim = 12, 4, 3, 2
    X = rng.normal(size=(n, obs))
    coef = rng.normal(size=n)
    s_tab, a_tab = rng.integers(5, size=n), rng.integers(n_act, size=n)
    a_disc = rng.integers(n_act, size=n)
    errs = {}

    tab = TabularSoftmaxPolicy(5, n_act)
    tab.set_values(rng.normal(size=5 * n_act))
    errs["tabular_softmax_policy"] = _fd_family(tab, s_tab, a_tab, coef, rng, "policy", step)

    cat = MLPCategoricalPolicy(obs, n_act, hidden, rng=rng)
    cat.set_values(cat.params.values + 0.3 * rng.normal(size=len(cat.params)))
    errs["mlp_categorical_policy"] = _fd_family(cat, X, a_disc, coef, rng, "policy", step)

    sg = SquashedGaussianPolicy(obs, act_dim, 2.0, hidden, rng=rng)
    sg.set_values(sg.params.values + 0.3 * rng.normal(size=len(sg.params)))
    a_cont = sg.sample_batch(X, rng)
    errs["squashed_gaussian_policy"] = _fd_family(sg, X, a_cont, coef, rng, "policy", step)

    tc = TabularCritic(5, n_act)
    tc.set_values(rng.normal(size=5 * n_act))
    errs["tabular_critic"] = _fd_family(tc, s_tab, a_tab, coef, rng, "critic", step)

    dq = MLPCritic(obs, n_actions=n_act, hidden=hidden, rng=rng)
    errs["mlp_critic_discrete"] = _fd_family(dq, X, a_disc, coef, rng, "critic", step)

    cq = MLPCritic(obs, act_dim=act_dim, hidden=hidden, rng=rng)
    errs["mlp_critic_continuous"] = _fd_family(cq, X, rng.uniform(-1, 1, size=(n, act_dim)), coef, rng, "critic", step)
    return CheckResult("approximator_gradients", max(errs.values()), tolerance, detail=errs)


def check_proxy_bound(rng: np.random.Generator, n_mdps: int = 20, horizon: int = 4, extra=(),
                      slack: float = 1e-12) -> CheckResult:
    """Exact ``p_minus <= min_i (1 - p_i)`` at every state-action pair; the error is the violation count.

    ``extra`` holds further CMDPs (e.g. the configured grid) checked with a random policy.
    """
    specs = [random_cmdp(rng, n_states=int(rng.integers(3, 6)), n_actions=2, sparsity=0.3) for _ in range(n_mdps)]
    specs += list(extra)
    violations, pairs = 0, 0
    gap_lo, gap_hi = np.inf, -np.inf
    skipped = 0
    for spec in specs:
        pol = _random_policy(rng, spec.state_count, spec.action_count)
        try:
            rt = enumerate_risk_probabilities(spec, pol, horizon)
        except EnumerationBudgetError:
            skipped += 1
            continue
        bound = np.min(1.0 - rt.p, axis=0)
        violations += int(np.sum(rt.p_minus > bound + slack))
        pairs += rt.p_minus.size
        # gap to the independence product, reported only
        gap = rt.p_minus - np.prod(1.0 - rt.p, axis=0)
        gap_lo, gap_hi = min(gap_lo, float(gap.min())), max(gap_hi, float(gap.max()))
    return CheckResult("proxy_bound", float(violations), 0.0, inclusive=True,
                       detail={"mdps": len(specs) - skipped, "skipped": skipped, "pairs": pairs,
                               "product_gap_min": gap_lo if pairs else None,
                               "product_gap_max": gap_hi if pairs else None})


def check_dual_monotonicity(spec: CmdpSpec, rng: np.random.Generator, trials: int = 50) -> CheckResult:
    """One projected dual step raises ``lam`` exactly on supported violating cells and keeps it nonnegative."""
    S, A, n = spec.state_count, spec.action_count, spec.n_constraints
    mismatches, negatives, cells = 0, 0, 0
    for _ in range(trials):
        pol = _random_policy(rng, S, A, scale=2.0)
        d = occupancy_measure(spec, pol).d * (rng.random((S, A)) > 0.2)
        qc = safety_tables(spec, pol)
        eps = float(rng.uniform(0.0, max(float(qc.max()), 1e-3)))
        lam0 = rng.exponential(1.0, size=(n, S, A)) * (rng.random((n, S, A)) > 0.3)
        new = dual_update(DualTable(lam0), qc, d, eps, float(rng.uniform(0.1, 10.0))).lam
        should_rise = (d[None] > 0) & (qc > eps)
        rose = new > lam0
        mismatches += int(np.sum(rose != should_rise))
        negatives += int(np.sum(new < 0))
        cells += new.size
    return CheckResult("dual_monotonicity", float(mismatches + negatives), 0.0, inclusive=True,
                       detail={"trials": trials, "cells": cells, "mismatches": mismatches, "negatives": negatives})


def run_suite(spec: CmdpSpec, seed: int = 0, corrupt: float = 0.0, tower_horizon: int = 4,
              proxy_horizon: int = 4, gradient_points: int = 10) -> dict:
    """All properties on ``spec`` (tower equivalence on a random 3-state, 2-action MDP).

    Each property draws from its own stream of ``seed`` so they can be rerun individually.
    """
    ss = np.random.SeedSequence(int(seed)).spawn(len(PROPERTIES))
    rngs = {name: np.random.default_rng(s) for name, s in zip(PROPERTIES, ss)}
    tower_rng = rngs["tower_equivalence"]
    results = [
        check_reduction(spec, rngs["reduction"], corrupt),
        check_rewrite_identity(spec, rngs["rewrite_identity"]),
        check_tower_equivalence(random_cmdp(tower_rng, 3, 2, spec.n_constraints or 1), tower_rng, tower_horizon),
        check_policy_gradients(spec, rngs["policy_gradient"], gradient_points),
        check_approximator_gradients(rngs["approximator_gradients"]),
        check_proxy_bound(rngs["proxy_bound"], horizon=proxy_horizon, extra=(spec,)),
        check_dual_monotonicity(spec, rngs["dual_monotonicity"]),
    ]
    props = {r.name: r.to_dict() for r in results}
    return {"passed": all(r.passed for r in results), "properties": props}


__all__ = [
    "PROPERTIES",
    "CheckResult",
    "random_cmdp",
    "enumerate_paths",
    "check_reduction",
    "check_rewrite_identity",
    "check_tower_equivalence",
    "check_policy_gradients",
    "check_approximator_gradients",
    "check_proxy_bound",
    "check_dual_monotonicity",
    "run_suite",
]
