"""Policies and critics with exact parameter gradients.

Two families: tabular (integer states) and small tanh MLPs (feature vectors).
Every model keeps its parameters in one flat :class:`ParamVector`; gradients
are returned in the same layout so they can be added straight onto the
parameters.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_SQUASH_EDGE = 1.0 - 1e-9


@dataclass
class ParamVector:
    """Flat parameter vector with named blocks ``name -> (start, stop, shape)``."""

    values: np.ndarray
    layout: dict

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("parameters must be finite")

    @classmethod
    def from_blocks(cls, blocks: dict[str, np.ndarray]) -> "ParamVector":
        layout, chunks, pos = {}, [], 0
        for name, arr in blocks.items():
            arr = np.asarray(arr, dtype=float)
            layout[name] = (pos, pos + arr.size, tuple(arr.shape))
            chunks.append(arr.ravel())
            pos += arr.size
        return cls(np.concatenate(chunks) if chunks else np.zeros(0), layout)

    def block(self, name: str) -> np.ndarray:
        start, stop, shape = self.layout[name]
        return self.values[start:stop].reshape(shape)

    def __len__(self) -> int:
        return self.values.size

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), dict(self.layout))

    def like(self, values) -> "ParamVector":
        return ParamVector(np.asarray(values, dtype=float), dict(self.layout))

    def zeros_like(self) -> "ParamVector":
        return self.like(np.zeros_like(self.values))

    def to_dict(self) -> dict:
        return {
            "layout": {k: [v[0], v[1], list(v[2])] for k, v in self.layout.items()},
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        layout = {k: (int(v[0]), int(v[1]), tuple(int(x) for x in v[2])) for k, v in d["layout"].items()}
        return cls(np.array(d["values"], dtype=float), layout)


def save_checkpoint(path, params: dict[str, ParamVector], meta: dict | None = None) -> None:
    """Write named parameter vectors as JSON (``.json``) or NumPy archive (``.npz``).

    Both round-trip bit-exactly.
    """
    path = Path(path)
    if path.suffix == ".npz":
        arrays = {f"{k}__values": v.values for k, v in params.items()}
        header = {k: v.to_dict()["layout"] for k, v in params.items()}
        np.savez(path, __header__=np.array(json.dumps({"layout": header, "meta": meta or {}})), **arrays)
        return
    doc = {"meta": meta or {}, "params": {k: v.to_dict() for k, v in params.items()}}
    path.write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[dict[str, ParamVector], dict]:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            header = json.loads(str(z["__header__"]))
            out = {}
            for k, lay in header["layout"].items():
                out[k] = ParamVector.from_dict({"layout": lay, "values": z[f"{k}__values"]})
        return out, header.get("meta", {})
    doc = json.loads(path.read_text())
    return {k: ParamVector.from_dict(v) for k, v in doc["params"].items()}, doc.get("meta", {})


# ---------------------------------------------------------------------------
# multilayer perceptron


def _orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    # orthonormal columns/rows, rescaled so entries have variance ~ 1/fan_in
    return q * math.sqrt(max(fan_in, fan_out) / fan_in)


class MLP:
    """tanh hidden layers, linear output. Works on a flat parameter array."""

    def __init__(self, in_dim: int, out_dim: int, hidden=(64, 64)):
        self.sizes = [int(in_dim), *[int(h) for h in hidden], int(out_dim)]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def init_blocks(self, rng: np.random.Generator, out_scale: float = 1.0) -> dict[str, np.ndarray]:
        blocks = {}
        for k in range(self.n_layers):
            fi, fo = self.sizes[k], self.sizes[k + 1]
            w = _orthogonal(rng, fi, fo)
            if k == self.n_layers - 1:
                w = w * out_scale
            blocks[f"W{k}"] = w
            blocks[f"b{k}"] = np.zeros(fo)
        return blocks

    def weights(self, params: ParamVector):
        return [(params.block(f"W{k}"), params.block(f"b{k}")) for k in range(self.n_layers)]

    def forward(self, params: ParamVector, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acts = [X]
        h = X
        layers = self.weights(params)
        for k, (W, b) in enumerate(layers):
            z = h @ W + b
            h = z if k == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return h, acts

    def backward(self, params: ParamVector, acts, dout: np.ndarray) -> np.ndarray:
        """Gradient of ``sum(dout * output)`` with respect to the flat parameters."""
        grad = np.zeros_like(params.values)
        layers = self.weights(params)
        delta = np.asarray(dout, dtype=float)
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            h_in = acts[k]
            ws, we, _ = params.layout[f"W{k}"]
            bs, be, _ = params.layout[f"b{k}"]
            grad[ws:we] = (h_in.T @ delta).ravel()
            grad[bs:be] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ W.T) * (1.0 - acts[k] ** 2)
        return grad


# ---------------------------------------------------------------------------
# policies


class Policy:
    family = "base"
    discrete = True

    params: ParamVector

    def snapshot(self) -> "Policy":
        return copy.deepcopy(self)

    def set_values(self, values: np.ndarray) -> None:
        self.params = self.params.like(np.array(values, dtype=float))

    def log_prob(self, state, action) -> float:
        return float(self.log_probs([state], [action])[0])

    def log_prob_grad(self, state, action) -> ParamVector:
        return self.params.like(self.score_sum([state], [action], np.ones(1)))

    def log_probs(self, states, actions) -> np.ndarray:
        raise NotImplementedError

    def score_sum(self, states, actions, coef) -> np.ndarray:
        """``sum_n coef[n] * grad log pi(actions[n] | states[n])`` as a flat array."""
        raise NotImplementedError


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _sample_categorical(p: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(p) - 1))


class TabularSoftmaxPolicy(Policy):
    """``pi(a|s) = softmax(theta[s])``."""

    family = "tabular_softmax"

    def __init__(self, n_states: int, n_actions: int, params: ParamVector | None = None):
        self.n_states, self.n_actions = n_states, n_actions
        self.params = params if params is not None else ParamVector.from_blocks({"logits": np.zeros((n_states, n_actions))})

    @property
    def logits(self) -> np.ndarray:
        return self.params.block("logits")

    def action_probs(self, states) -> np.ndarray:
        return _softmax(self.logits[np.asarray(states, dtype=int)])

    def prob_table(self) -> np.ndarray:
        return _softmax(self.logits)

    def sample(self, state, rng: np.random.Generator) -> int:
        return _sample_categorical(self.action_probs([state])[0], rng)

    def batch_sample(self, states, rngs) -> np.ndarray:
        probs = self.action_probs(states)
        return np.array([_sample_categorical(p, r) for p, r in zip(probs, rngs)], dtype=int)

    def log_probs(self, states, actions) -> np.ndarray:
        s = np.asarray(states, dtype=int)
        a = np.asarray(actions, dtype=int)
        lg = self.logits[s]
        m = lg.max(axis=1)
        lse = m + np.log(np.exp(lg - m[:, None]).sum(axis=1))
        return lg[np.arange(len(s)), a] - lse

    def score_sum(self, states, actions, coef) -> np.ndarray:
        s = np.asarray(states, dtype=int)
        a = np.asarray(actions, dtype=int)
        coef = np.asarray(coef, dtype=float)
        g = -self.action_probs(s) * coef[:, None]
        g[np.arange(len(s)), a] += coef
        out = np.zeros((self.n_states, self.n_actions))
        np.add.at(out, s, g)
        return out.ravel()


class MLPCategoricalPolicy(Policy):
    """Categorical policy over ``n_actions`` with MLP logits."""

    family = "mlp"

    def __init__(self, obs_dim: int, n_actions: int, hidden=(64, 64), rng: np.random.Generator | None = None,
                 params: ParamVector | None = None):
        self.obs_dim, self.n_actions = obs_dim, n_actions
        self.net = MLP(obs_dim, n_actions, hidden)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = ParamVector.from_blocks(self.net.init_blocks(rng, out_scale=0.01))
        self.params = params

    def action_probs(self, states) -> np.ndarray:
        logits, _ = self.net.forward(self.params, states)
        return _softmax(logits)

    def sample(self, state, rng: np.random.Generator) -> int:
        return _sample_categorical(self.action_probs([state])[0], rng)

    def batch_sample(self, states, rngs) -> np.ndarray:
        probs = self.action_probs(states)
        return np.array([_sample_categorical(p, r) for p, r in zip(probs, rngs)], dtype=int)

    def log_probs(self, states, actions) -> np.ndarray:
        logits, _ = self.net.forward(self.params, states)
        a = np.asarray(actions, dtype=int)
        m = logits.max(axis=1)
        lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
        return logits[np.arange(len(a)), a] - lse

    def score_sum(self, states, actions, coef) -> np.ndarray:
        logits, acts = self.net.forward(self.params, states)
        a = np.asarray(actions, dtype=int)
        coef = np.asarray(coef, dtype=float)
        d = -_softmax(logits) * coef[:, None]
        d[np.arange(len(a)), a] += coef
        return self.net.backward(self.params, acts, d)


def _log1m_tanh2(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2), stable for large |u|."""
    u = np.abs(u)
    return 2.0 * (math.log(2.0) - u - np.log1p(np.exp(-2.0 * u)))


class SquashedGaussianPolicy(Policy):
    """``a = bound * tanh(u)``, ``u ~ N(mu(s), exp(log_std)^2)`` with a learned state-independent log-std."""

    family = "mlp"
    discrete = False

    def __init__(self, obs_dim: int, act_dim: int, bound: float = 1.0, hidden=(64, 64),
                 rng: np.random.Generator | None = None, params: ParamVector | None = None,
                 init_log_std: float = -0.5):
        self.obs_dim, self.act_dim, self.bound = obs_dim, act_dim, float(bound)
        self.net = MLP(obs_dim, act_dim, hidden)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            blocks = self.net.init_blocks(rng, out_scale=0.01)
            blocks["log_std"] = np.full(act_dim, init_log_std)
            params = ParamVector.from_blocks(blocks)
        self.params = params

    def _raw_log_std(self) -> np.ndarray:
        return self.params.block("log_std")

    def log_std(self) -> np.ndarray:
        return np.clip(self._raw_log_std(), LOG_STD_MIN, LOG_STD_MAX)

    def mean(self, states) -> np.ndarray:
        mu, _ = self.net.forward(self.params, states)
        return mu

    def sample_batch(self, states, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(states)
        u = mu + np.exp(self.log_std()) * rng.standard_normal(mu.shape)
        return self.bound * np.clip(np.tanh(u), -_SQUASH_EDGE, _SQUASH_EDGE)

    def sample(self, state, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch([state], rng)[0]

    def batch_sample(self, states, rngs) -> np.ndarray:
        """One draw per state, each from its own generator; matches :meth:`sample` row by row."""
        mu = self.mean(states)
        std = np.exp(self.log_std())
        u = np.stack([m + std * r.standard_normal((1, self.act_dim))[0] for m, r in zip(mu, rngs)])
        return self.bound * np.clip(np.tanh(u), -_SQUASH_EDGE, _SQUASH_EDGE)

    def deterministic_action(self, state) -> np.ndarray:
        return self.bound * np.tanh(self.mean([state])[0])

    def _pre_squash(self, actions) -> np.ndarray:
        a = np.atleast_2d(np.asarray(actions, dtype=float)) / self.bound
        if np.any(np.abs(a) > 1.0):
            raise ValueError("action outside the squashing bounds")
        return np.arctanh(np.clip(a, -_SQUASH_EDGE, _SQUASH_EDGE))

    def log_probs(self, states, actions) -> np.ndarray:
        u = self._pre_squash(actions)
        mu = self.mean(states)
        ls = self.log_std()
        z = (u - mu) / np.exp(ls)
        gauss = -0.5 * z**2 - ls - 0.5 * math.log(2 * math.pi)
        jac = _log1m_tanh2(u) + math.log(self.bound)
        return (gauss - jac).sum(axis=1)

    def score_sum(self, states, actions, coef) -> np.ndarray:
        u = self._pre_squash(actions)
        mu, acts = self.net.forward(self.params, states)
        raw = self._raw_log_std()
        ls = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
        var = np.exp(2 * ls)
        coef = np.asarray(coef, dtype=float)[:, None]
        grad = self.net.backward(self.params, acts, coef * (u - mu) / var)
        d_ls = (coef * ((u - mu) ** 2 / var - 1.0)).sum(axis=0)
        d_ls = np.where((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX), d_ls, 0.0)
        s, e, _ = self.params.layout["log_std"]
        grad[s:e] = d_ls
        return grad


# ---------------------------------------------------------------------------
# critics


class Critic:
    """Q-function approximator. ``nonneg`` critics clamp their output at 0."""

    params: ParamVector
    nonneg: bool = False
    discrete = True

    def raw(self, states, actions) -> np.ndarray:
        raise NotImplementedError

    def value(self, states, actions) -> np.ndarray:
        q = self.raw(states, actions)
        return np.maximum(q, 0.0) if self.nonneg else q

    def eval(self, state, action) -> float:
        return float(self.value([state], [action])[0])

    def grad(self, state, action) -> ParamVector:
        """Gradient of the pre-clamp output."""
        return self.params.like(self.raw_grad_sum([state], [action], np.ones(1)))

    def raw_grad_sum(self, states, actions, coef) -> np.ndarray:
        raise NotImplementedError

    def regress(self, states, actions, targets, lr: float) -> float:
        """One gradient step on the mean squared error; returns the pre-step MSE."""
        raise NotImplementedError

    def snapshot(self) -> "Critic":
        return copy.deepcopy(self)

    def set_values(self, values) -> None:
        self.params = self.params.like(np.array(values, dtype=float))


class TabularCritic(Critic):
    family = "tabular"

    def __init__(self, n_states: int, n_actions: int, nonneg: bool = False, params: ParamVector | None = None,
                 lr_power: float = 0.0):
        self.n_states, self.n_actions, self.nonneg = n_states, n_actions, nonneg
        self.params = params if params is not None else ParamVector.from_blocks({"table": np.zeros((n_states, n_actions))})
        # per-entry update counts drive the optional lr / (1 + n)^power decay
        self.lr_power = lr_power
        self.counts = np.zeros((n_states, n_actions))

    @property
    def table(self) -> np.ndarray:
        return self.params.block("table")

    def raw(self, states, actions) -> np.ndarray:
        return self.table[np.asarray(states, dtype=int), np.asarray(actions, dtype=int)]

    def all_actions(self, states) -> np.ndarray:
        q = self.table[np.asarray(states, dtype=int)]
        return np.maximum(q, 0.0) if self.nonneg else q

    def raw_grad_sum(self, states, actions, coef) -> np.ndarray:
        out = np.zeros((self.n_states, self.n_actions))
        np.add.at(out, (np.asarray(states, dtype=int), np.asarray(actions, dtype=int)), coef)
        return out.ravel()

    def regress(self, states, actions, targets, lr: float) -> float:
        s = np.asarray(states, dtype=int)
        a = np.asarray(actions, dtype=int)
        y = np.asarray(targets, dtype=float)
        if len(y) == 0:
            raise ValueError("empty batch")
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite regression targets")
        table = self.table
        resid = table[s, a] - y
        mse = float(np.mean(resid**2))
        # per-entry mean residual: each visited entry moves lr toward its batch mean target
        sums = np.zeros_like(table)
        cnt = np.zeros_like(table)
        np.add.at(sums, (s, a), resid)
        np.add.at(cnt, (s, a), 1.0)
        hit = cnt > 0
        step = np.full_like(table, lr)
        if self.lr_power > 0:
            step = lr / (1.0 + self.counts) ** self.lr_power
        new = table.copy()
        new[hit] -= step[hit] * sums[hit] / cnt[hit]
        self.counts += cnt
        self.params = self.params.like(new.ravel())
        return mse

    def td_step(self, s: int, a: int, target: float, lr: float) -> float:
        """Single-sample tabular update; returns the signed TD error."""
        table = self.table
        err = target - table[s, a]
        step = lr / (1.0 + self.counts[s, a]) ** self.lr_power if self.lr_power > 0 else lr
        self.params.values[s * self.n_actions + a] += step * err
        self.counts[s, a] += 1
        return float(err)


class MLPCritic(Critic):
    """MLP Q-function. Discrete: one output head per action. Continuous: (obs, action) input."""

    family = "mlp"

    def __init__(self, obs_dim: int, n_actions: int | None = None, act_dim: int | None = None, hidden=(64, 64),
                 nonneg: bool = False, rng: np.random.Generator | None = None, params: ParamVector | None = None,
                 zero_init: bool = False):
        if (n_actions is None) == (act_dim is None):
            raise ValueError("give exactly one of n_actions (discrete) or act_dim (continuous)")
        self.obs_dim, self.n_actions, self.act_dim, self.nonneg = obs_dim, n_actions, act_dim, nonneg
        self.discrete = n_actions is not None
        if self.discrete:
            self.net = MLP(obs_dim, n_actions, hidden)
        else:
            self.net = MLP(obs_dim + act_dim, 1, hidden)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            blocks = self.net.init_blocks(rng, out_scale=0.1)
            if zero_init:
                blocks = {k: np.zeros_like(v) for k, v in blocks.items()}
            params = ParamVector.from_blocks(blocks)
        self.params = params
        self.optimizer = None

    def _inputs(self, states, actions):
        X = np.atleast_2d(np.asarray(states, dtype=float))
        if self.discrete:
            return X
        A = np.atleast_2d(np.asarray(actions, dtype=float))
        return np.concatenate([X, A], axis=1)

    def raw(self, states, actions) -> np.ndarray:
        out, _ = self.net.forward(self.params, self._inputs(states, actions))
        if self.discrete:
            return out[np.arange(len(out)), np.asarray(actions, dtype=int)]
        return out[:, 0]

    def all_actions(self, states) -> np.ndarray:
        if not self.discrete:
            raise TypeError("all_actions requires a discrete critic")
        out, _ = self.net.forward(self.params, states)
        return np.maximum(out, 0.0) if self.nonneg else out

    def _dout(self, out, actions, coef):
        coef = np.asarray(coef, dtype=float)
        if self.discrete:
            d = np.zeros_like(out)
            d[np.arange(len(out)), np.asarray(actions, dtype=int)] = coef
            return d
        return coef[:, None]

    def raw_grad_sum(self, states, actions, coef) -> np.ndarray:
        out, acts = self.net.forward(self.params, self._inputs(states, actions))
        return self.net.backward(self.params, acts, self._dout(out, actions, coef))

    def regress(self, states, actions, targets, lr: float) -> float:
        y = np.asarray(targets, dtype=float)
        if len(y) == 0:
            raise ValueError("empty batch")
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite regression targets")
        out, acts = self.net.forward(self.params, self._inputs(states, actions))
        q = out[np.arange(len(out)), np.asarray(actions, dtype=int)] if self.discrete else out[:, 0]
        resid = q - y
        grad = self.net.backward(self.params, acts, self._dout(out, actions, resid / len(y)))
        if self.optimizer is not None:
            self.optimizer.lr = lr
            self.params = self.params.like(self.params.values - self.optimizer.direction(grad))
        else:
            self.params = self.params.like(self.params.values - lr * grad)
        return float(np.mean(resid**2))

    def use_adam(self) -> None:
        """Switch regression steps to Adam; moment estimates persist across calls."""
        if self.optimizer is None:
            self.optimizer = Adam(len(self.params), 1.0)


@dataclass
class CriticSet:
    """Task critic plus one nonnegative safety critic per constraint."""

    task_critic: Critic
    safety_critics: list

    def __post_init__(self):
        for c in self.safety_critics:
            c.nonneg = True

    @property
    def n_constraints(self) -> int:
        return len(self.safety_critics)

    def q_task(self, states, actions) -> np.ndarray:
        return self.task_critic.value(states, actions)

    def q_safety(self, states, actions) -> np.ndarray:
        """Safety values, shape (N, n_constraints)."""
        if not self.safety_critics:
            return np.zeros((len(states), 0))
        return np.stack([c.value(states, actions) for c in self.safety_critics], axis=1)

    def snapshot(self) -> "CriticSet":
        return copy.deepcopy(self)


# ---------------------------------------------------------------------------
# optimisation helpers


def finite_diff_check(fn: Callable[[np.ndarray], tuple[float, np.ndarray]], point, step: float = 1e-5) -> float:
    """Relative error between ``fn``'s analytic gradient and central differences.

    ``fn(values) -> (value, grad)``. The error is ``||g - g_fd|| / max(||g||, ||g_fd||)``
    in the Euclidean norm, so coordinates that are zero up to rounding do not
    dominate; two zero gradients give 0.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point.values if isinstance(point, ParamVector) else point, dtype=float)
    f0, g = fn(x)
    g = np.asarray(g.values if isinstance(g, ParamVector) else g, dtype=float)
    if not np.isfinite(f0):
        raise ValueError("function value is not finite")
    num = np.empty_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        fp, _ = fn(xp)
        fm, _ = fn(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value at coordinate {j}")
        num[j] = (fp - fm) / (2 * step)
    scale = max(np.linalg.norm(g), np.linalg.norm(num))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(g - num) / scale)


class Adam:
    """Adam on flat arrays, ascending or descending by the sign of the step call."""

    def __init__(self, size: int, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def direction(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        mh = self.m / (1 - self.b1**self.t)
        vh = self.v / (1 - self.b2**self.t)
        return self.lr * mh / (np.sqrt(vh) + self.eps)


class SGD:
    def __init__(self, size: int, lr: float):
        self.lr = lr

    def direction(self, grad: np.ndarray) -> np.ndarray:
        return self.lr * grad


def make_optimizer(name: str, size: int, lr: float):
    if name == "adam":
        return Adam(size, lr)
    if name == "sgd":
        return SGD(size, lr)
    raise ValueError(f"unknown optimizer {name!r}")
