"""Exact tabular machinery: policy evaluation, occupancy, risk probabilities,
exact policy gradients and the state-action primal-dual solver.

Policies may be passed as a :class:`~objsupp.approx.TabularSoftmaxPolicy` or as
a plain ``(S, A)`` probability matrix. Constraint channels credit ``C_i(s')``
on the transition into ``s'``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .approx import ParamVector, TabularSoftmaxPolicy
from .core import TASK, CmdpSpec


class EnumerationBudgetError(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Occupancy:
    """Normalised discounted state-action occupancy ``d(s, a)``."""

    d: np.ndarray

    def __post_init__(self):
        if np.any(self.d < -1e-12):
            raise ValueError("occupancy has negative entries")

    @property
    def state_marginal(self) -> np.ndarray:
        return self.d.sum(axis=1)


@dataclass(frozen=True)
class DualTable:
    """State-action multipliers ``lam[i, s, a] >= 0``."""

    lam: np.ndarray

    def __post_init__(self):
        if np.any(self.lam < 0):
            raise ValueError("multipliers must be nonnegative")

    @classmethod
    def zeros(cls, n_constraints: int, n_states: int, n_actions: int) -> "DualTable":
        return cls(np.zeros((n_constraints, n_states, n_actions)))


@dataclass(frozen=True)
class RiskTables:
    p: np.ndarray  # (n, S, A)
    p_minus: np.ndarray  # (S, A)
    horizon: int
    n_paths: int


def policy_matrix(policy) -> np.ndarray:
    if isinstance(policy, TabularSoftmaxPolicy):
        return policy.prob_table()
    pi = np.asarray(policy, dtype=float)
    if pi.ndim != 2:
        raise TypeError("policy must be a tabular softmax policy or an (S, A) matrix")
    return pi


def channel_reward(spec: CmdpSpec, channel) -> tuple[np.ndarray, float]:
    """Expected one-step channel value ``r(s, a)`` and the channel discount."""
    P = spec.transition
    if channel == TASK:
        return np.einsum("sat,sat->sa", P, spec.reward), spec.gamma
    if isinstance(channel, (int, np.integer)) and 0 <= channel < spec.n_constraints:
        return P @ spec.constraint_table(channel), spec.constraint_gamma(channel)
    raise ValueError(f"unknown channel {channel!r}")


def _state_transition(spec: CmdpSpec, pi: np.ndarray) -> np.ndarray:
    return np.einsum("sa,sat->st", pi, spec.transition)


def state_values(spec: CmdpSpec, policy, channel=TASK) -> np.ndarray:
    pi = policy_matrix(policy)
    r, g = channel_reward(spec, channel)
    P_pi = _state_transition(spec, pi)
    r_pi = (pi * r).sum(axis=1)
    return np.linalg.solve(np.eye(spec.state_count) - g * P_pi, r_pi)


def exact_policy_evaluation(spec: CmdpSpec, policy, channel=TASK) -> np.ndarray:
    """``Q(s, a)`` of a channel by a direct linear solve."""
    r, g = channel_reward(spec, channel)
    V = state_values(spec, policy, channel)
    return r + g * spec.transition @ V


def occupancy_measure(spec: CmdpSpec, policy, gamma: float | None = None) -> Occupancy:
    """``d(s, a) = (1 - gamma) * sum_t gamma^t Pr(s_t = s, a_t = a)``."""
    g = spec.gamma if gamma is None else gamma
    pi = policy_matrix(policy)
    P_pi = _state_transition(spec, pi)
    ds = (1 - g) * np.linalg.solve((np.eye(spec.state_count) - g * P_pi).T, spec.initial_dist)
    return Occupancy(np.clip(ds, 0.0, None)[:, None] * pi)


def exact_objective(spec: CmdpSpec, policy, channel=TASK) -> float:
    return float(spec.initial_dist @ state_values(spec, policy, channel))


def _softmax_policy(policy) -> TabularSoftmaxPolicy:
    if not isinstance(policy, TabularSoftmaxPolicy):
        raise TypeError(f"expected a tabular softmax policy, got {type(policy).__name__}")
    return policy


def exact_policy_gradient(spec: CmdpSpec, policy, weight_table: np.ndarray, gamma: float | None = None) -> ParamVector:
    """``sum_{s,a} d(s, a) W(s, a) grad log pi(a|s)``.

    With ``W = Q`` of a channel this is ``(1 - gamma) * grad J`` of that channel
    when ``gamma`` is the channel discount.
    """
    pol = _softmax_policy(policy)
    pi = pol.prob_table()
    d = occupancy_measure(spec, pi, gamma).d
    W = np.asarray(weight_table, dtype=float)
    ds = d.sum(axis=1)
    baseline = (pi * W).sum(axis=1)
    g = ds[:, None] * pi * (W - baseline[:, None])
    return pol.params.like(g.ravel())


def value_iteration(spec: CmdpSpec, tol: float = 1e-12, max_iter: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal task ``Q*`` and a greedy deterministic policy matrix (constraints ignored)."""
    r, g = channel_reward(spec, TASK)
    Q = np.zeros_like(r)
    for _ in range(max_iter):
        Q_new = r + g * spec.transition @ Q.max(axis=1)
        if np.max(np.abs(Q_new - Q)) < tol:
            Q = Q_new
            break
        Q = Q_new
    pi = np.zeros_like(Q)
    pi[np.arange(len(Q)), Q.argmax(axis=1)] = 1.0
    return Q, pi


def enumerate_risk_probabilities(spec: CmdpSpec, policy, horizon: int, max_paths: int = 10**7) -> RiskTables:
    """Exact ``p_i(s, a)`` and ``p_minus(s, a)`` by enumerating every continuation.

    After taking ``a`` in ``s``, all paths ``s_1 .. s_horizon`` under the policy
    are listed with their probabilities; a path counts for risk ``i`` when some
    ``C_i(s_k) = 1``. Joint events are tracked exactly through a risk bitmask.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pi = policy_matrix(policy)
    S, A, n = spec.state_count, spec.action_count, spec.n_constraints
    P = spec.transition
    masks_of_state = np.zeros(S, dtype=np.int64)
    for i in range(n):
        masks_of_state |= spec.constraint_table(i).astype(np.int64) << i
    branch = int((P > 0).sum(axis=2).max()) * int((pi > 0).sum(axis=1).max())
    bound = S * A * int((P > 0).sum(axis=2).max()) * branch ** (horizon - 1)
    if bound > max_paths:
        raise EnumerationBudgetError(f"up to {bound} paths exceed the budget of {max_paths}")

    p = np.zeros((n, S, A))
    p_minus = np.zeros((S, A))
    total = 0
    for s in range(S):
        for a in range(A):
            nxt = np.nonzero(P[s, a] > 0)[0]
            prob = P[s, a, nxt]
            state = nxt
            mask = masks_of_state[nxt]
            for _ in range(horizon - 1):
                # expand every path by every (action, next state) with positive probability
                pa = pi[state]  # (M, A)
                pt = P[state]  # (M, A, S)
                w = prob[:, None, None] * pa[:, :, None] * pt
                idx_m, _, idx_s = np.nonzero(w > 0)
                vals = w[w > 0]
                prob = vals
                state = idx_s
                mask = mask[idx_m] | masks_of_state[idx_s]
            total += len(prob)
            for i in range(n):
                p[i, s, a] = prob[(mask >> i) & 1 == 1].sum()
            p_minus[s, a] = prob[mask == 0].sum()
    return RiskTables(p=p, p_minus=p_minus, horizon=horizon, n_paths=total)


def state_action_distributions(spec: CmdpSpec, policy, horizon: int) -> np.ndarray:
    """``Pr(s_t = s, a_t = a)`` for ``t < horizon``, shape (horizon, S, A)."""
    pi = policy_matrix(policy)
    P_pi = _state_transition(spec, pi)
    rho = spec.initial_dist.astype(float).copy()
    out = np.zeros((horizon, spec.state_count, spec.action_count))
    for t in range(horizon):
        out[t] = rho[:, None] * pi
        rho = rho @ P_pi
    return out


def exact_soft_switch_gradient(spec: CmdpSpec, policy, q_task: np.ndarray, q_safety: np.ndarray, weights,
                               horizon: int) -> np.ndarray:
    """Finite-horizon soft-switching gradient with exact risk probabilities.

    ``sum_t sum_{s,a} Pr(s_t, a_t) (p_minus^{(H-t)} Q_R - sum_i w_i p_i^{(H-t)} Q_Ci) grad log pi``
    where ``p^{(h)}`` looks ``h`` states ahead. Returned as a flat array.
    """
    pol = _softmax_policy(policy)
    pi = pol.prob_table()
    w = np.asarray(weights, dtype=float)
    occ = state_action_distributions(spec, pi, horizon)
    S, A = spec.state_count, spec.action_count
    ss, aa = np.meshgrid(np.arange(S), np.arange(A), indexing="ij")
    ss, aa = ss.ravel(), aa.ravel()
    total = np.zeros(len(pol.params))
    for t in range(horizon):
        rt = enumerate_risk_probabilities(spec, pi, horizon - t)
        W = rt.p_minus * q_task - np.einsum("i,isa,isa->sa", w, rt.p, q_safety)
        total += pol.score_sum(ss, aa, (occ[t] * W).ravel())
    return total


def dual_update(dual: DualTable, q_c_tables: np.ndarray, occupancy, epsilon: float, step: float) -> DualTable:
    """Projected ascent: ``lam <- max(0, lam + step * d * (Q_C - eps))`` per (i, s, a)."""
    if step <= 0:
        raise ValueError("step must be positive")
    d = occupancy.d if isinstance(occupancy, Occupancy) else np.asarray(occupancy, dtype=float)
    q = np.asarray(q_c_tables, dtype=float)
    if q.shape != dual.lam.shape or d.shape != dual.lam.shape[1:]:
        raise ValueError(f"shape mismatch: lam {dual.lam.shape}, Q_C {q.shape}, d {d.shape}")
    return DualTable(np.maximum(0.0, dual.lam + step * d[None] * (q - epsilon)))


def safety_tables(spec: CmdpSpec, policy) -> np.ndarray:
    return np.stack([exact_policy_evaluation(spec, policy, i) for i in range(spec.n_constraints)])


def max_violation(spec: CmdpSpec, policy, epsilon: float, support_tol: float = 1e-4) -> np.ndarray:
    """Per-constraint ``max (Q_Ci(s, a) - eps)`` over pairs with ``d(s, a) > support_tol``."""
    pi = policy_matrix(policy)
    d = occupancy_measure(spec, pi).d
    qc = safety_tables(spec, pi)
    support = d > support_tol
    return np.array([np.max(qc[i][support] - epsilon) for i in range(spec.n_constraints)])


@dataclass
class PrimalDualTrace:
    task_objective: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)
    lambda_norm: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_objective": [float(x) for x in self.task_objective],
            "max_violation": [[float(v) for v in row] for row in self.max_violation],
            "lambda_norm": [float(x) for x in self.lambda_norm],
            "grad_norm": [float(x) for x in self.grad_norm],
        }


def lagrangian_gradient(spec: CmdpSpec, policy, dual: DualTable, epsilon: float, include_eps_term: bool = True,
                        q_task=None, q_safety=None, occupancy=None) -> ParamVector:
    """Exact ``E_d[(Q_R - sum_i lam_i (Q_Ci - eps)) grad log pi]``; drop ``eps`` with ``include_eps_term=False``."""
    pol = _softmax_policy(policy)
    pi = pol.prob_table()
    qr = exact_policy_evaluation(spec, pi, TASK) if q_task is None else q_task
    qc = safety_tables(spec, pi) if q_safety is None else q_safety
    d = occupancy_measure(spec, pi).d if occupancy is None else occupancy
    eps = epsilon if include_eps_term else 0.0
    W = qr - np.sum(dual.lam * (qc - eps), axis=0)
    ds = d.sum(axis=1)
    g = ds[:, None] * pi * (W - (pi * W).sum(axis=1, keepdims=True))
    return pol.params.like(g.ravel())


def primal_dual_solve(spec: CmdpSpec, policy: TabularSoftmaxPolicy, epsilon: float, steps: int,
                      lr_primal: float, lr_dual: float, include_eps_term: bool = True,
                      support_tol: float = 1e-4, max_grad_norm: float = 1e6):
    """Alternate exact primal ascent on the relaxed Lagrangian with :func:`dual_update`.

    Returns the final policy, the multipliers and a per-iteration trace of the
    task objective, the un-relaxed max state-action violation and ``||lam||``.
    """
    pol = _softmax_policy(policy).snapshot()
    n, S, A = spec.n_constraints, spec.state_count, spec.action_count
    dual = DualTable.zeros(n, S, A)
    trace = PrimalDualTrace()
    for _ in range(steps):
        pi = pol.prob_table()
        qr = exact_policy_evaluation(spec, pi, TASK)
        qc = safety_tables(spec, pi)
        occ = occupancy_measure(spec, pi)
        g = lagrangian_gradient(spec, pol, dual, epsilon, include_eps_term, qr, qc, occ.d).values
        gn = float(np.linalg.norm(g))
        if not np.isfinite(gn) or gn > max_grad_norm:
            raise DivergenceError(f"primal gradient norm {gn:.3g} exceeds {max_grad_norm:.3g}")
        support = occ.d > support_tol
        trace.task_objective.append(float(spec.initial_dist @ (pi * qr).sum(axis=1)))
        trace.max_violation.append([float(np.max(qc[i][support] - epsilon)) for i in range(n)])
        trace.lambda_norm.append(float(np.linalg.norm(dual.lam)))
        trace.grad_norm.append(gn)
        pol.set_values(pol.params.values + lr_primal * g)
        dual = dual_update(dual, qc, occ, epsilon, lr_dual)
    return pol, dual, trace


def dump_oracle(path, **tables) -> None:
    """Serialise named arrays (Q tables, occupancies, probability tables) to JSON."""
    doc = {k: np.asarray(v).tolist() for k, v in tables.items()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_oracle(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        return {k: np.array(v) for k, v in json.load(fh).items()}
