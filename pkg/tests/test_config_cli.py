import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from ternopt import cli, results, wire
from ternopt.config import ConfigError, config_digest, dump_config, parse_config
from ternopt.engine import run
from ternopt.problems import make_sensor_problem
from ternopt.quantizer import QuantizerSpec
from ternopt.schedule import Schedule
from ternopt.topology import preset

BASE = {
    "topology": {"preset": "five-agent"},
    "schedule": {"a1": 1.0, "a2": 1.0, "a3": 0.3, "delta1": 0.3, "delta2": 0.6},
    "quantizer": {"kind": "ternary", "r": 5.0, "clamp_policy": "saturate"},
    "problem": {"kind": "sensor", "s": 3, "d": 2, "n": 100, "regularization": 0.01},
    "iterations": 10,
    "seeds": [1, 2],
}


def write_config(tmp_path, **overrides):
    raw = json.loads(json.dumps(BASE))
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_parse_dump_idempotent():
    cfg = parse_config(yaml.safe_dump(BASE))
    text = dump_config(cfg)
    again = parse_config(text)
    assert dump_config(again) == text
    assert config_digest(again) == config_digest(cfg)
    assert cfg.quantizer == QuantizerSpec("ternary", 5.0, "saturate")


def test_empty_config_uses_defaults():
    cfg = parse_config("")
    assert cfg.schedule == Schedule() and cfg.seeds == [0]


def test_digest_changes_with_content():
    a = parse_config(yaml.safe_dump(BASE))
    b = parse_config(yaml.safe_dump({**BASE, "iterations": 11}))
    assert config_digest(a) != config_digest(b)


@pytest.mark.parametrize(
    "raw, path",
    [
        ({"schedule": {"delta2": "big"}}, "schedule.delta2"),
        ({"schedule": {"gamma": 1}}, "schedule.gamma"),
        ({"quantizer": {"r": -1}}, "quantizer"),
        ({"problem": {"kind": "mnist"}}, "problem.kind"),
        ({"problem": {"n": 1.5}}, "problem.n"),
        ({"topology": {"edges": [[0, 1]]}}, "topology.m"),
        ({"topology": {"m": 3, "edges": [[0, 1, 2]]}}, "topology.edges"),
        ({"seeds": []}, "seeds"),
        ({"iterations": -1}, "iterations"),
        ({"output": {"log": "all"}}, "output.log"),
        ({"extra": 1}, "<root>.extra"),
    ],
)
def test_field_precise_errors(raw, path):
    with pytest.raises(ConfigError) as err:
        parse_config(yaml.safe_dump(raw))
    assert err.value.path == path


def test_problem_seed_defaults_to_run_seed():
    cfg = parse_config(yaml.safe_dump(BASE))
    a, b = cfg.problem.build(5, 1), cfg.problem.build(5, 2)
    assert not np.array_equal(a.M, b.M)
    fixed = parse_config(yaml.safe_dump({**BASE, "problem": {"kind": "sensor", "seed": 7}}))
    np.testing.assert_array_equal(fixed.problem.build(5, 1).M, fixed.problem.build(5, 2).M)


def test_validate_default_config(tmp_path, capsys):
    assert cli.main(["validate", str(write_config(tmp_path))]) == 0
    out = capsys.readouterr().out
    assert "algebraic connectivity" in out and "FAIL" not in out


def test_validate_names_failed_condition(tmp_path, capsys):
    path = write_config(tmp_path, schedule={"delta2": 0.4})
    assert cli.main(["validate", str(path)]) == 1
    assert "FAIL  δ2 > 0.5" in capsys.readouterr().out


def test_validate_disconnected(tmp_path, capsys):
    path = write_config(tmp_path, topology={"m": 4, "edges": [[0, 1], [2, 3]]})
    assert cli.main(["validate", str(path)]) == 1
    assert "[2, 3]" in capsys.readouterr().out


def test_validate_bad_config(tmp_path, capsys):
    path = write_config(tmp_path, schedule={"delta1": 2.0})
    assert cli.main(["validate", str(path)]) == 1
    assert "schedule" in capsys.readouterr().err


def test_run_writes_reproducible_csvs(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(cfg), "--out", str(out1)]) == 0
    assert cli.main(["run", str(cfg), "--out", str(out2)]) == 0
    names = sorted(p.name for p in out1.glob("*.csv"))
    assert names == ["run_mean.csv", "run_seed1.csv", "run_seed2.csv"]
    for n in names:
        assert (out1 / n).read_bytes() == (out2 / n).read_bytes()
    table, digest = results.read_metrics_csv(out1 / "run_seed1.csv")
    assert table.shape == (11, 6)
    assert digest == config_digest(parse_config(cfg.read_text()))
    lines = (out1 / "run_seed1.csv").read_text().splitlines()
    assert lines[0].startswith("# config_digest: ")
    assert lines[1] == ",".join(results.CSV_COLUMNS)
    meta = json.loads((out1 / "run_meta.json").read_text())
    assert meta["config_digest"] == digest and set(meta["runs"]) == {"1", "2"}


def test_run_uses_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(write_config(tmp_path, seeds=[3]))]) == 0
    assert (tmp_path / "env" / "run_seed3.csv").exists()


def test_run_refuses_invalid_schedule(tmp_path):
    path = write_config(tmp_path, schedule={"delta2": 0.4})
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 1


def test_run_divergence_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, schedule={"a1": 1e4}, quantizer={"kind": "identity"}, seeds=[0],
                        iterations=100)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "diverged" in capsys.readouterr().err
    table, _ = results.read_metrics_csv(tmp_path / "o" / "run_seed0.csv")
    assert 0 < len(table) < 101


def test_run_threshold_violation_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, quantizer={"r": 1e-6, "clamp_policy": "error"}, seeds=[0])
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "exceeds threshold" in capsys.readouterr().err


def test_full_log_archives_and_attack(tmp_path, capsys):
    path = write_config(tmp_path, output={"log": "full"}, seeds=[1], iterations=20)
    out = tmp_path / "o"
    assert cli.main(["run", str(path), "--out", str(out)]) == 0
    cws = wire.read_tern(out / "broadcasts_seed1.tern")
    assert len(cws) == 20 * 5
    traj = results.load_trajectory(out / "traj_seed1.npz")
    levels, r = wire.decode(cws[5])
    np.testing.assert_array_equal(levels * r, traj.rounds[1].broadcast[0])
    assert cli.main(["attack", str(out / "traj_seed1.npz"), "--out", str(tmp_path / "a.csv")]) == 0
    assert "relative error mean" in capsys.readouterr().out


def test_attack_on_metrics_only_trajectory(tmp_path, capsys):
    traj = run(preset("five-agent"), Schedule(), QuantizerSpec("identity"), make_sensor_problem(), 5, seed=0)
    results.save_trajectory(tmp_path / "t.npz", traj)
    assert cli.main(["attack", str(tmp_path / "t.npz")]) == 2
    assert "metrics-only" in capsys.readouterr().err


def test_attack_on_unquantized_trajectory(tmp_path):
    traj = run(preset("five-agent"), Schedule(), QuantizerSpec("identity"), make_sensor_problem(), 30,
               seed=0, record="full")
    results.save_trajectory(tmp_path / "t.npz", traj)
    out = tmp_path / "atk.csv"
    assert cli.main(["attack", str(tmp_path / "t.npz"), "--target", "2", "--out", str(out)]) == 0
    errs = np.loadtxt(out, delimiter=",", skiprows=2, usecols=2)
    assert errs.size == 29 and errs.max() <= 1e-9


def test_trajectory_npz_roundtrip(tmp_path):
    traj = run(preset("five-agent"), Schedule(), QuantizerSpec("ternary", 5.0, "saturate"),
               make_sensor_problem(), 8, seed=0, record="full")
    results.save_trajectory(tmp_path / "t.npz", traj)
    back = results.load_trajectory(tmp_path / "t.npz")
    np.testing.assert_array_equal(back.states, traj.states)
    assert back.quantizer == traj.quantizer
    assert len(back.rounds) == 8
    np.testing.assert_array_equal(back.rounds[3].gradients, traj.rounds[3].gradients)


def test_dp_check(capsys):
    assert cli.main(["dp-check", "--r", "10", "--T", "100", "--grid-step", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "per-step delta = 0.1\n" in out
    assert "basic composition delta = 10\n" in out


def test_dp_check_bad_grid(capsys):
    assert cli.main(["dp-check", "--r", "1", "--grid-step", "0.5"]) == 1


def test_codec_bench(capsys):
    assert cli.main(["codec-bench", "--vectors", "200", "--d", "100000"]) == 0
    out = capsys.readouterr().out
    assert "200/200 ok" in out and "compression ratio 19.98" in out


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "ternopt", "dp-check", "--r", "2", "--grid-step", "0.01"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "per-step delta = 0.5" in res.stdout


DEMO_CONFIGS = sorted((Path(__file__).parents[1] / "demos" / "configs").glob("*.yaml"))


@pytest.mark.parametrize("path", DEMO_CONFIGS, ids=lambda p: p.stem)
def test_demo_configs_validate(path, capsys):
    assert cli.main(["validate", str(path)]) == 0
