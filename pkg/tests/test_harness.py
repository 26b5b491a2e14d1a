import copy
import csv
import json
from pathlib import Path

import numpy as np
import pytest

import objsupp
from objsupp import harness
from objsupp.cli import main
from objsupp.harness import (
    CSV_COLUMNS,
    OUTPUT_DIR_ENV,
    ConfigError,
    load_config,
    mean_std,
    parse_config,
    run_oracle_check,
)

CONFIGS = Path(objsupp.__file__).parent / "configs"
GRID = json.loads((CONFIGS / "hazardgrid3.json").read_text())
NAV = json.loads((CONFIGS / "pointnav.json").read_text())


def _doc(base=GRID, **sections):
    doc = copy.deepcopy(base)
    for k, v in sections.items():
        if v is None:
            doc.pop(k, None)
        elif isinstance(v, dict) and isinstance(doc.get(k), dict):
            doc[k].update(v)
        else:
            doc[k] = v
    return doc


def _small(**sections):
    base = _doc(run={"seeds": [0], "iterations": 3, "rollouts_per_iter": 4, "critic_warmup": 1,
                     "eval_episodes": 3})
    return _doc(base, **sections)


@pytest.fixture
def write_cfg(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "out"))

    def write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return write


def _path_of(doc):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    return info.value.path


@pytest.mark.parametrize("doc, path", [
    (_doc(extra={}), "extra"),
    (_doc(suppression={"kapa": 1.0}), "suppression.kapa"),
    (_doc(run={"seeds": []}), "run.seeds"),
    (_doc(run={"iterations": "ten"}), "run.iterations"),
    (_doc(run={"gamma": 1.5}), "run.gamma"),
    (_doc(recovery=None), "recovery"),
    (_doc(method="reward_penalty"), "penalty"),
    (_doc(method="ppo"), "method"),
    (_doc(policy={"family": "squashed_gaussian"}), "policy.family"),
    (_doc(environment={"goal_cell": [9, 9]}), "environment"),
    (_doc(NAV, environment={"obstacles": [{"center": [1, 1], "radius": -1}]}), "environment.obstacles[0].radius"),
    (_doc(NAV, environment={"obstacles": [{"center": [1, 1], "radius": 1, "colour": 2}]}),
     "environment.obstacles[0].colour"),
])
def test_config_errors_name_the_field(doc, path):
    assert _path_of(doc) == path


def test_stock_configs_parse_with_defaults_filled():
    for name in ("hazardgrid3.json", "hazardgrid7.json", "pointnav.json"):
        cfg = load_config(CONFIGS / name)
        assert set(cfg.resolved) >= {"environment", "method", "critic", "policy", "run", "output", "oracle"}
    assert load_config(CONFIGS / "hazardgrid3.json").section("suppression")["clamp_proxy"] is True


def test_mean_std_uses_sample_deviation():
    out = mean_std([1.0, 2.0, 3.0])
    assert out["mean"] == 2.0 and out["std"] == 1.0 and out["formatted"] == "2.000 ± 1.000"
    assert mean_std([4.0])["std"] is None
    assert mean_std([])["mean"] is None


def test_cli_exit_codes(write_cfg, tmp_path, capsys):
    assert main(["train", "--config", write_cfg(_small())]) == 0
    assert main(["train", "--config", write_cfg(_doc(bogus=1), "bad.json")]) == 2
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["train", "--config", str(tmp_path / "broken.json")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["launch"])
    assert info.value.code == 2
    err = capsys.readouterr().err
    assert "bogus" in err


def test_train_outputs(write_cfg, tmp_path):
    assert main(["train", "--config", write_cfg(_small())]) == 0
    out = tmp_path / "out"
    with open(out / "metrics_seed0.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 4
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "complete" and summary["partial"] is False
    assert summary["config"]["run"]["iterations"] == 3
    assert summary["config"]["suppression"]["kappa"] == 3.0
    assert summary["per_seed"][0]["final"]["source"] == "evaluation"
    assert set(summary["aggregate"]) == {"task_return", "violations_c0", "violations_c1", "recovery_fraction"}


def test_zero_iterations_gives_header_only_csv(write_cfg, tmp_path):
    assert main(["train", "--config", write_cfg(_small(run={"iterations": 0, "critic_warmup": 0}))]) == 0
    text = (tmp_path / "out" / "metrics_seed0.csv").read_text()
    assert text == ",".join(CSV_COLUMNS) + "\n"


def test_runs_are_byte_identical(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(_small(run={"seeds": [0, 3]})))
    blobs = []
    for name in ("a", "b"):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / name))
        assert main(["train", "--config", str(cfg)]) == 0
        blobs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert blobs[0] == blobs[1]
    assert set(blobs[0]) >= {"metrics_seed0.csv", "metrics_seed3.csv", "summary.json", "checkpoint_seed3.npz"}


def test_output_dir_from_config_without_env(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(_small(output={"dir": str(tmp_path / "from_cfg")}, run={"iterations": 0})))
    assert main(["train", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_cfg" / "summary.json").exists()


def test_seed_override(write_cfg, tmp_path):
    path = write_cfg(_small(run={"seeds": [0, 1]}))
    assert main(["--seed-override", "7", "train", "--config", path]) == 0
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["seeds"] == [7]
    assert main(["train", "--config", path, "--seed-override", "8"]) == 0
    assert (tmp_path / "out" / "metrics_seed8.csv").exists()


def test_partial_run_is_flagged(write_cfg, tmp_path, monkeypatch):
    real = harness.train

    def flaky(factory, agent, cfg, seed, iterations=None, callback=None):
        real(factory, agent, cfg, seed, iterations=2, callback=callback)
        raise RuntimeError("boom")

    monkeypatch.setattr(harness, "train", flaky)
    assert main(["train", "--config", write_cfg(_small())]) == 3
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["partial"] is True and summary["status"] == "partial"
    seed = summary["per_seed"][0]
    assert seed["status"] == "failed" and "boom" in seed["error"] and seed["iterations_completed"] == 2
    assert len((tmp_path / "out" / "metrics_seed0.csv").read_text().splitlines()) == 3


def test_eval_round_trip_and_errors(write_cfg, tmp_path, capsys):
    path = write_cfg(_small())
    assert main(["train", "--config", path]) == 0
    ckpt = str(tmp_path / "out" / "checkpoint_seed0.npz")
    capsys.readouterr()
    assert main(["eval", "--config", path, "--checkpoint", ckpt, "--episodes", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["episodes"] == 5 and len(report["violations_per_episode"]) == 2
    assert main(["eval", "--config", path, "--checkpoint", ckpt, "--episodes", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["task_return_mean"] is None
    assert main(["eval", "--config", path, "--checkpoint", ckpt, "--episodes", "-1"]) == 2
    bigger = write_cfg(_small(environment={"width": 4}), "bigger.json")
    assert main(["eval", "--config", bigger, "--checkpoint", ckpt, "--episodes", "2"]) == 3
    assert main(["eval", "--config", path, "--checkpoint", str(tmp_path / "nope.npz"), "--episodes", "2"]) == 3


def test_oracle_check_report(write_cfg, tmp_path, capsys):
    path = write_cfg(_doc(oracle={"gradient_points": 3}))
    assert main(["oracle-check", "--config", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert set(report) == {"seed", "states", "actions", "passed", "properties"}
    assert set(report["properties"]) == set(objsupp.checks.PROPERTIES)
    for prop in report["properties"].values():
        assert set(prop) == {"passed", "error", "tolerance", "detail"}
    saved = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
    assert saved == report


def test_oracle_check_detects_corrupted_critic(write_cfg):
    cfg = parse_config(_doc(oracle={"corrupt_critic": 0.25, "gradient_points": 2}))
    report, _ = run_oracle_check(cfg)
    red = report["properties"]["reduction"]
    assert report["passed"] is False and red["passed"] is False and red["error"] > red["tolerance"]
    assert report["properties"]["rewrite_identity"]["passed"] is True


def test_oracle_check_rejects_continuous_env(write_cfg):
    assert main(["oracle-check", "--config", write_cfg(NAV)]) == 2


def test_checkpoint_restores_parameters(tmp_path):
    cfg = parse_config(_small())
    agent = harness.build_agent(cfg, 0)
    agent.task_policy.set_values(np.arange(len(agent.task_policy.params), dtype=float))
    harness.save_agent(tmp_path / "c.npz", agent, {"seed": 0})
    back = harness.load_agent(cfg, tmp_path / "c.npz")
    np.testing.assert_array_equal(back.task_policy.params.values, agent.task_policy.params.values)


def test_module_entry_point_exit_status(write_cfg):
    import subprocess
    import sys

    bad = write_cfg(_doc(run={"seeds": []}), "bad.json")
    proc = subprocess.run([sys.executable, "-m", "objsupp", "train", "--config", bad], capture_output=True, text=True)
    assert proc.returncode == 2 and "run.seeds" in proc.stderr
