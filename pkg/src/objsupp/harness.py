"""Config-driven experiment runner: strict JSON configs, training, evaluation and oracle checks.

A config file has the sections ``environment``, ``method``, ``suppression``,
``critic``, ``policy``, ``run`` and ``output``, plus ``recovery`` (layered
methods), ``penalty`` (reward penalty) and ``oracle`` (oracle checks). Unknown
keys anywhere are errors.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .algos import SuppressionConfig
from .approx import (
    CriticSet,
    MLPCritic,
    SquashedGaussianPolicy,
    TabularCritic,
    TabularSoftmaxPolicy,
    load_checkpoint,
    save_checkpoint,
)
from .checks import run_suite
from .critics import CriticTrainConfig
from .envs import HazardGrid, HazardGridConfig, Obstacle, PointNav2D, PointNav2DConfig, grid_to_cmdp
from .training import METHODS, Agent, TrainConfig, derive_seed, evaluate, train, uses_safety_layer

OUTPUT_DIR_ENV = "OBJSUPP_OUTPUT_DIR"
CSV_COLUMNS = ("iter", "task_return_mean", "violations_c0", "violations_c1", "p_minus_mean", "recovery_fraction",
               "grad_norm_task", "grad_norm_recovery")
ENV_TYPES = ("hazard_grid", "point_nav")
POLICY_FAMILIES = {"hazard_grid": ("tabular_softmax",), "point_nav": ("squashed_gaussian",)}
CRITIC_FAMILIES = {"hazard_grid": ("tabular",), "point_nav": ("mlp",)}


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CheckpointError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# strict parsing


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _number(v, path, integer=False, minimum=None, exclusive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {json.dumps(v)}")
    if integer and not (isinstance(v, int) or float(v).is_integer()):
        raise ConfigError(path, f"expected an integer, got {v}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if minimum is not None and (v <= minimum if exclusive else v < minimum):
        raise ConfigError(path, f"must be {'>' if exclusive else '>='} {minimum}, got {v}")
    return int(v) if integer else float(v)


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true or false, got {json.dumps(v)}")
    return v


def _choice(v, path, options):
    if v not in options:
        raise ConfigError(path, f"expected one of {list(options)}, got {json.dumps(v)}")
    return v


def _num_list(v, path, length=None, integer=False, minimum=None):
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list, got {json.dumps(v)}")
    if length is not None and len(v) != length:
        raise ConfigError(path, f"expected {length} entries, got {len(v)}")
    return [_number(x, f"{path}[{i}]", integer, minimum) for i, x in enumerate(v)]


def _cells(v, path):
    if not isinstance(v, list):
        raise ConfigError(path, f"expected a list of [x, y] cells, got {json.dumps(v)}")
    return [_num_list(c, f"{path}[{i}]", 2, integer=True) for i, c in enumerate(v)]


def _section(doc: dict, key: str, required: bool):
    if key not in doc:
        if required:
            raise ConfigError(key, "section is required")
        return {}
    sec = doc[key]
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected an object")
    return sec


def _fields(sec: dict, path: str, schema: dict) -> dict:
    """Validate ``sec`` against ``{key: (parser, default)}``; ``default=REQUIRED`` marks required keys."""
    for k in sec:
        if k not in schema:
            raise ConfigError(_join(path, k), f"unknown key (allowed: {', '.join(sorted(schema))})")
    out = {}
    for k, (parse, default) in schema.items():
        if k in sec:
            out[k] = parse(sec[k], _join(path, k))
        elif default is REQUIRED:
            raise ConfigError(_join(path, k), "is required")
        else:
            out[k] = copy.deepcopy(default)
    return out


REQUIRED = object()


def _nullable(parse):
    return lambda v, p: None if v is None else parse(v, p)


def _pos(integer=False, minimum=0, exclusive=True):
    return lambda v, p: _number(v, p, integer, minimum, exclusive)


def _num(v, p):
    return _number(v, p)


def _str(v, p):
    if not isinstance(v, str) or not v:
        raise ConfigError(p, f"expected a non-empty string, got {json.dumps(v)}")
    return v


def _hidden(v, p):
    return _num_list(v, p, integer=True, minimum=1)


GRID_SCHEMA = {
    "type": (_str, REQUIRED),
    "width": (_pos(True), REQUIRED),
    "height": (_pos(True), REQUIRED),
    "goal_cell": (lambda v, p: _num_list(v, p, 2, True), REQUIRED),
    "start_cell": (lambda v, p: _num_list(v, p, 2, True), [0, 0]),
    "hazard_cells": (_cells, []),
    "pit_cells": (_cells, []),
    "slip_prob": (lambda v, p: _number(v, p, minimum=0.0), 0.0),
    "step_reward": (_num, -0.1),
    "goal_reward": (_num, 10.0),
    "max_steps": (_pos(True), 50),
}


def _obstacles(v, path):
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list of obstacle objects")
    schema = {
        "center": (lambda v, p: _num_list(v, p, 2), REQUIRED),
        "radius": (_pos(), REQUIRED),
        "amplitude": (lambda v, p: _num_list(v, p, 2), [0.0, 0.0]),
        "period": (_num, 1.0),
        "phase": (_num, 0.0),
    }
    out = []
    for i, o in enumerate(v):
        if not isinstance(o, dict):
            raise ConfigError(f"{path}[{i}]", "expected an object")
        out.append(_fields(o, f"{path}[{i}]", schema))
    return out


NAV_SCHEMA = {
    "type": (_str, REQUIRED),
    "workspace": (lambda v, p: _num_list(v, p, 4), [0.0, 0.0, 10.0, 4.0]),
    "start": (lambda v, p: _num_list(v, p, 2), [0.5, 2.0]),
    "goal": (lambda v, p: _num_list(v, p, 2), [9.5, 2.0]),
    "goal_radius": (_pos(), 0.4),
    "obstacles": (_obstacles, []),
    "boundary_margin": (_pos(), 0.5),
    "dt": (_pos(), 0.2),
    "max_speed": (_pos(), 1.0),
    "max_steps": (_pos(True), 100),
    "time_penalty": (_num, 0.01),
    "progress_scale": (_num, 1.0),
    "goal_reward": (_num, 5.0),
    "start_jitter": (lambda v, p: _number(v, p, minimum=0.0), 0.0),
}

SUPPRESSION_SCHEMA = {
    "kappa": (lambda v, p: _number(v, p, minimum=0.0), 1.0),
    "weights": (lambda v, p: _num_list(v, p, 2, minimum=0.0), [1.0, 1.0]),
    "epsilon": (lambda v, p: _number(v, p, minimum=0.0), 0.1),
    "policy_lr": (_pos(), 0.1),
    "normalize_advantage": (_bool, False),
    "clamp_proxy": (_bool, True),
    "recovery_task_term": (_bool, False),
    "state_baseline": (_bool, False),
}

RECOVERY_SCHEMA = {
    "weights": (_nullable(lambda v, p: _num_list(v, p, 2, minimum=0.0)), None),
    "lr": (_nullable(_pos()), None),
}

PENALTY_SCHEMA = {"weights": (_nullable(lambda v, p: _num_list(v, p, 2, minimum=0.0)), None)}

CRITIC_SCHEMA = {
    "family": (_str, REQUIRED),
    "hidden": (_hidden, [64, 64]),
    "method": (lambda v, p: _choice(v, p, ("td0", "monte_carlo")), "td0"),
    "learning_rate": (_pos(), 0.5),
    "batch_size": (_pos(True), 256),
    "target_update": (_nullable(lambda v, p: _number(v, p, minimum=0.0, exclusive=True)), None),
    "epochs": (_pos(True), 1),
    "optimizer": (lambda v, p: _choice(v, p, ("sgd", "adam")), "sgd"),
}

POLICY_SCHEMA = {
    "family": (_str, REQUIRED),
    "hidden": (_hidden, [64, 64]),
    "optimizer": (lambda v, p: _choice(v, p, ("sgd", "adam")), "sgd"),
    "action_bound": (_pos(), 1.0),
    "init_log_std": (_num, -0.5),
    "action_samples": (_pos(True), 8),
}


def _seeds(v, p):
    seeds = _num_list(v, p, integer=True, minimum=0)
    if not seeds:
        raise ConfigError(p, "seeds list must be non-empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(p, "seeds must be distinct")
    return seeds


RUN_SCHEMA = {
    "seeds": (_seeds, REQUIRED),
    "iterations": (_pos(True, 0, False), REQUIRED),
    "rollouts_per_iter": (_pos(True), 16),
    "horizon": (_pos(True), 50),
    "gamma": (lambda v, p: _unit_open(v, p), 0.95),
    "gamma_c": (lambda v, p: [_unit_open(x, f"{p}[{i}]") for i, x in enumerate(_num_list(v, p, 2))], [0.9, 0.9]),
    "critic_warmup": (_pos(True, 0, False), 0),
    "eval_episodes": (_pos(True, 0, False), 50),
}

OUTPUT_SCHEMA = {"dir": (_str, "runs/experiment")}

ORACLE_SCHEMA = {
    "seed": (_pos(True, 0, False), 0),
    "epsilon": (_nullable(lambda v, p: _number(v, p, minimum=0.0)), None),
    "corrupt_critic": (lambda v, p: _number(v, p, minimum=0.0), 0.0),
    "tower_horizon": (_pos(True), 4),
    "proxy_horizon": (_pos(True), 4),
    "gradient_points": (_pos(True), 10),
}


def _unit_open(v, p):
    x = _number(v, p)
    if not 0.0 < x < 1.0:
        raise ConfigError(p, f"must lie strictly inside (0, 1), got {x}")
    return x


TOP_LEVEL = ("environment", "method", "suppression", "recovery", "penalty", "critic", "policy", "run", "output",
             "oracle")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description. ``resolved`` is the config with every default filled in."""

    resolved: dict
    source: str = ""

    @property
    def method(self) -> str:
        return self.resolved["method"]

    @property
    def env_type(self) -> str:
        return self.resolved["environment"]["type"]

    @property
    def seeds(self) -> list[int]:
        return list(self.resolved["run"]["seeds"])

    def section(self, name: str) -> dict:
        return self.resolved[name]


def parse_config(doc: Any, source: str = "") -> ExperimentConfig:
    """Validate a decoded JSON document; raises :class:`ConfigError` naming the first bad field."""
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a JSON object")
    for k in doc:
        if k not in TOP_LEVEL:
            raise ConfigError(k, f"unknown section (allowed: {', '.join(TOP_LEVEL)})")
    env = _section(doc, "environment", True)
    etype = _choice(env.get("type"), "environment.type", ENV_TYPES)
    out = {"environment": _fields(env, "environment", GRID_SCHEMA if etype == "hazard_grid" else NAV_SCHEMA)}
    if "method" not in doc:
        raise ConfigError("method", "is required")
    method = out["method"] = _choice(doc["method"], "method", METHODS)
    suppressive = method in ("suppression", "suppression+recovery")
    out["suppression"] = _fields(_section(doc, "suppression", suppressive), "suppression", SUPPRESSION_SCHEMA)
    out["recovery"] = _fields(_section(doc, "recovery", uses_safety_layer(method)), "recovery", RECOVERY_SCHEMA)
    out["penalty"] = _fields(_section(doc, "penalty", method == "reward_penalty"), "penalty", PENALTY_SCHEMA)
    out["critic"] = _fields(_section(doc, "critic", True), "critic", CRITIC_SCHEMA)
    out["policy"] = _fields(_section(doc, "policy", True), "policy", POLICY_SCHEMA)
    out["run"] = _fields(_section(doc, "run", True), "run", RUN_SCHEMA)
    out["output"] = _fields(_section(doc, "output", False), "output", OUTPUT_SCHEMA)
    out["oracle"] = _fields(_section(doc, "oracle", False), "oracle", ORACLE_SCHEMA)
    _choice(out["policy"]["family"], "policy.family", POLICY_FAMILIES[etype])
    _choice(out["critic"]["family"], "critic.family", CRITIC_FAMILIES[etype])
    cfg = ExperimentConfig(out, source)
    # dataclass-level invariants (cell bounds, slip range, ...) reported against their section
    for name, build in (("environment", env_config), ("run", train_config)):
        try:
            build(cfg)
        except (ValueError, TypeError) as exc:
            raise ConfigError(name, str(exc)) from None
    return cfg


def _merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def with_overrides(cfg: ExperimentConfig, patch: dict) -> ExperimentConfig:
    """Re-validated copy of ``cfg`` with ``patch`` deep-merged into the resolved document."""
    return parse_config(_merge(cfg.resolved, patch), cfg.source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return parse_config(doc, str(path))


# ---------------------------------------------------------------------------
# builders


def env_config(cfg: ExperimentConfig):
    e = {k: v for k, v in cfg.section("environment").items() if k != "type"}
    if cfg.env_type == "hazard_grid":
        return HazardGridConfig(**{k: tuple(v) if k.endswith("_cell") else v for k, v in e.items()})
    e["obstacles"] = tuple(Obstacle(tuple(o["center"]), o["radius"], tuple(o["amplitude"]), o["period"], o["phase"])
                           for o in e["obstacles"])
    return PointNav2DConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in e.items()})


def env_factory(cfg: ExperimentConfig):
    ecfg = env_config(cfg)
    if cfg.env_type == "hazard_grid":
        return lambda: HazardGrid(ecfg)
    return lambda: PointNav2D(ecfg)


def suppression_config(cfg: ExperimentConfig) -> SuppressionConfig:
    s = cfg.section("suppression")
    return SuppressionConfig(**{**s, "weights": tuple(s["weights"])})


def train_config(cfg: ExperimentConfig, iterations: int | None = None) -> TrainConfig:
    run, crit, pol = cfg.section("run"), cfg.section("critic"), cfg.section("policy")
    rec, pen = cfg.section("recovery"), cfg.section("penalty")
    return TrainConfig(
        method=cfg.method,
        iterations=run["iterations"] if iterations is None else iterations,
        rollouts_per_iter=run["rollouts_per_iter"],
        horizon=run["horizon"],
        gamma=run["gamma"],
        gamma_c=tuple(run["gamma_c"]),
        suppression=suppression_config(cfg),
        critic=CriticTrainConfig(**{k: v for k, v in crit.items() if k not in ("family", "hidden")}),
        optimizer=pol["optimizer"],
        recovery_lr=rec.get("lr"),
        recovery_weights=tuple(rec["weights"]) if rec.get("weights") is not None else None,
        penalty_weights=tuple(pen["weights"]) if pen.get("weights") is not None else None,
        action_samples=pol["action_samples"],
        critic_warmup=run["critic_warmup"],
    )


def build_agent(cfg: ExperimentConfig, seed: int) -> Agent:
    """Fresh policies and critics; initial weights come from the ``init`` streams of ``seed``."""
    env = env_factory(cfg)()
    pol, crit = cfg.section("policy"), cfg.section("critic")

    def rng(label):
        return np.random.default_rng(derive_seed(seed, "init", label))

    if cfg.env_type == "hazard_grid":
        nS, nA = env.n_states, 4
        critics = CriticSet(TabularCritic(nS, nA), [TabularCritic(nS, nA) for _ in range(2)])
        task = TabularSoftmaxPolicy(nS, nA)
        recovery = TabularSoftmaxPolicy(nS, nA) if uses_safety_layer(cfg.method) else None
        return Agent(task, critics, recovery)
    od, ad, hid = env.obs_dim, env.act_dim, tuple(crit["hidden"])
    critics = CriticSet(MLPCritic(od, act_dim=ad, hidden=hid, rng=rng("qr")),
                        [MLPCritic(od, act_dim=ad, hidden=hid, rng=rng(f"qc{i}")) for i in range(2)])
    ph = tuple(pol["hidden"])

    def gaussian(label):
        return SquashedGaussianPolicy(od, ad, pol["action_bound"], ph, rng(label), init_log_std=pol["init_log_std"])

    recovery = gaussian("sigma") if uses_safety_layer(cfg.method) else None
    return Agent(gaussian("pi"), critics, recovery)


def _agent_params(agent: Agent) -> dict:
    out = {"task_policy": agent.task_policy.params, "q_task": agent.critic_set.task_critic.params}
    for i, c in enumerate(agent.critic_set.safety_critics):
        out[f"q_c{i}"] = c.params
    if agent.recovery_policy is not None:
        out["recovery_policy"] = agent.recovery_policy.params
    return out


def save_agent(path, agent: Agent, meta: dict) -> None:
    save_checkpoint(path, _agent_params(agent), meta)


def load_agent(cfg: ExperimentConfig, path, seed: int = 0) -> Agent:
    """Agent for ``cfg`` with weights from ``path``; every block must match the config's architecture."""
    try:
        params, _ = load_checkpoint(path)
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    agent = build_agent(cfg, seed)
    expected = _agent_params(agent)
    if set(params) != set(expected):
        raise CheckpointError(f"checkpoint components {sorted(params)} do not match {sorted(expected)}")
    for name, pv in expected.items():
        if params[name].layout != pv.layout:
            raise CheckpointError(f"checkpoint block {name!r} does not match the configured architecture")
    agent.task_policy.set_values(params["task_policy"].values)
    agent.critic_set.task_critic.set_values(params["q_task"].values)
    for i, c in enumerate(agent.critic_set.safety_critics):
        c.set_values(params[f"q_c{i}"].values)
    if agent.recovery_policy is not None:
        agent.recovery_policy.set_values(params["recovery_policy"].values)
    return agent


# ---------------------------------------------------------------------------
# outputs


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.section("output")["dir"])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def csv_row(rec: dict) -> list[str]:
    viol = list(rec["violations"]) + [None] * (2 - len(rec["violations"]))
    return [_cell(rec["iter"]), _cell(rec["task_return_mean"]), _cell(viol[0]), _cell(viol[1]),
            _cell(rec["p_minus_mean"]), _cell(rec["recovery_fraction"]), _cell(rec["grad_norms"]["task"]),
            _cell(rec["grad_norms"]["recovery"])]


class MetricsWriter:
    """Row-at-a-time CSV with the fixed column set; flushed after every row so partial runs keep their rows."""

    def __init__(self, path):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(CSV_COLUMNS)
        self.fh.flush()

    def write(self, rec: dict) -> None:
        self.writer.writerow(csv_row(rec))
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def mean_std(values) -> dict:
    """Mean and sample standard deviation (``n - 1``); std is ``None`` for fewer than two values."""
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0, "formatted": None}
    m = float(np.mean(vals))
    s = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
    text = f"{m:.3f} ± {s:.3f}" if s is not None else f"{m:.3f}"
    return {"mean": m, "std": s, "n": len(vals), "formatted": text}


def _final_metrics(records: list[dict], evaluation: dict | None, rollouts: int) -> dict:
    if evaluation is not None and evaluation["episodes"]:
        return {"source": "evaluation", "episodes": evaluation["episodes"],
                "task_return": evaluation["task_return_mean"], "violations": evaluation["violations"],
                "recovery_fraction": evaluation["recovery_fraction"]}
    if records:
        last = records[-1]
        return {"source": "last_iteration", "episodes": rollouts, "task_return": last["task_return_mean"],
                "violations": [v / rollouts for v in last["violations"]],
                "recovery_fraction": last["recovery_fraction"]}
    return {"source": "none", "episodes": 0, "task_return": None, "violations": [None, None],
            "recovery_fraction": None}


def aggregate(per_seed: list[dict]) -> dict:
    done = [r["final"] for r in per_seed if r["status"] == "complete"]
    return {
        "task_return": mean_std(f["task_return"] for f in done),
        "violations_c0": mean_std(f["violations"][0] for f in done),
        "violations_c1": mean_std(f["violations"][1] for f in done),
        "recovery_fraction": mean_std(f["recovery_fraction"] for f in done),
    }


def _dump_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# commands


def train_seed(cfg: ExperimentConfig, seed: int, out: Path) -> dict:
    """Train and evaluate one seed, writing its CSV and checkpoint. Never raises on training failure."""
    tcfg = train_config(cfg)
    factory = env_factory(cfg)
    writer = MetricsWriter(out / f"metrics_seed{seed}.csv")
    records: list[dict] = []
    result = {"seed": seed, "csv": f"metrics_seed{seed}.csv", "checkpoint": None, "iterations_completed": 0}
    try:
        agent = build_agent(cfg, seed)

        def record(rec):
            records.append(rec)
            writer.write(rec)

        train(factory, agent, tcfg, seed, callback=record)
        ev = evaluate(factory, agent, cfg.method, cfg.section("run")["eval_episodes"], tcfg.horizon, seed,
                      tcfg.suppression.epsilon)
        name = f"checkpoint_seed{seed}.npz"
        save_agent(out / name, agent, {"method": cfg.method, "seed": seed, "iterations": len(records)})
        result.update(status="complete", checkpoint=name, final=_final_metrics(records, ev, tcfg.rollouts_per_iter))
    except Exception as exc:  # noqa: BLE001 - recorded as a partial run
        result.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                      final=_final_metrics(records, None, tcfg.rollouts_per_iter))
    finally:
        writer.close()
    result["iterations_completed"] = len(records)
    return result


def run_train(cfg: ExperimentConfig, seed_override: int | None = None) -> tuple[dict, Path]:
    """Train every seed, then write ``summary.json``; returns the summary and the output directory."""
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [seed_override] if seed_override is not None else cfg.seeds
    per_seed = [train_seed(cfg, s, out) for s in seeds]
    complete = all(r["status"] == "complete" for r in per_seed)
    resolved = copy.deepcopy(cfg.resolved)
    resolved["run"]["seeds"] = seeds
    summary = {
        "status": "complete" if complete else "partial",
        "partial": not complete,
        "method": cfg.method,
        "seeds": seeds,
        "per_seed": per_seed,
        "aggregate": aggregate(per_seed),
        "config": resolved,
    }
    _dump_json(out / "summary.json", summary)
    return summary, out


def run_eval(cfg: ExperimentConfig, checkpoint, episodes: int, seed_override: int | None = None) -> tuple[dict, Path]:
    if episodes < 0:
        raise ConfigError("episodes", "must be >= 0")
    seed = seed_override if seed_override is not None else cfg.seeds[0]
    agent = load_agent(cfg, checkpoint, seed)
    run = cfg.section("run")
    ev = evaluate(env_factory(cfg), agent, cfg.method, episodes, run["horizon"], seed,
                  cfg.section("suppression")["epsilon"])
    report = {
        "method": cfg.method,
        "checkpoint": str(checkpoint),
        "seed": seed,
        "episodes": ev["episodes"],
        "task_return_mean": ev["task_return_mean"],
        "violations_per_episode": ev["violations"],
        "recovery_fraction": ev["recovery_fraction"],
    }
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "eval_report.json", report)
    return report, out


def run_oracle_check(cfg: ExperimentConfig, seed_override: int | None = None) -> tuple[dict, Path]:
    if cfg.env_type != "hazard_grid":
        raise ConfigError("environment.type", "oracle checks need an enumerable environment (hazard_grid)")
    ora, run = cfg.section("oracle"), cfg.section("run")
    sup = cfg.section("suppression")
    eps = ora["epsilon"] if ora["epsilon"] is not None else sup["epsilon"]
    spec = grid_to_cmdp(env_config(cfg), run["gamma"], tuple(run["gamma_c"]), tuple(sup["weights"]), eps)
    seed = seed_override if seed_override is not None else ora["seed"]
    suite = run_suite(spec, seed, ora["corrupt_critic"], ora["tower_horizon"], ora["proxy_horizon"],
                      ora["gradient_points"])
    report = {"seed": seed, "states": spec.state_count, "actions": spec.action_count, **suite}
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "oracle_report.json", report)
    return report, out


__all__ = [
    "CSV_COLUMNS",
    "OUTPUT_DIR_ENV",
    "CheckpointError",
    "ConfigError",
    "ExperimentConfig",
    "aggregate",
    "build_agent",
    "env_config",
    "env_factory",
    "load_agent",
    "load_config",
    "mean_std",
    "parse_config",
    "run_eval",
    "run_oracle_check",
    "run_train",
    "save_agent",
    "train_config",
    "train_seed",
    "with_overrides",
]
