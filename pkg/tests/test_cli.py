import csv
import json

import pytest

from src.cli import main, parse_levels, parse_seeds
from src.config import ConfigError
from tests.conftest import DATA, TOY_LINE

ENV = {
    "fleet": {"num_trains": 2, "headway": 120.0, "trains_up": 1, "trains_down": 1},
    "disturbance": {"probability_per_stop": 0.3, "max_extra_dwell": 30.0, "seed": 0},
}
PPO = {
    "n_steps": 16,
    "batch_size": 8,
    "epochs_per_update": 2,
    "total_iterations": 2,
    "hidden_sizes": [8, 8],
    "checkpoint_every": 1,
}


@pytest.fixture
def run_file(tmp_path):
    (tmp_path / "toy.csv").write_text(TOY_LINE)
    (tmp_path / "env.json").write_text(json.dumps(ENV))
    (tmp_path / "ppo.json").write_text(json.dumps(PPO))
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "line_file": "toy.csv",
        "physics_file": str(DATA / "default_physics.json"),
        "env_file": "env.json",
        "ppo_file": "ppo.json",
        "out_dir": str(tmp_path / "out"),
    }))
    return path


def test_parse_seeds():
    assert parse_seeds("7") == [7]
    assert parse_seeds("0,3,5") == [0, 3, 5]
    assert parse_seeds("0-4") == [0, 1, 2, 3, 4]
    with pytest.raises(ConfigError):
        parse_seeds("a-b")
    with pytest.raises(ConfigError):
        parse_seeds(",")


def test_parse_levels():
    assert parse_levels("0,0.25,1") == [0.0, 0.25, 1.0]
    with pytest.raises(ConfigError):
        parse_levels("0.5,1.5")


def test_validate_shipped_data(tmp_path, capsys):
    run = tmp_path / "run.json"
    run.write_text(json.dumps({
        "line_file": str(DATA / "xiamen_line1.csv"),
        "physics_file": str(DATA / "default_physics.json"),
        "env_file": str(DATA / "env.json"),
        "ppo_file": str(DATA / "ppo.json"),
        "out_dir": str(tmp_path / "out"),
    }))
    assert main(["validate-data", "-c", str(run)]) == 0
    out = capsys.readouterr().out
    assert "24 stations, 23 segments, 30.38 km" in out


def test_missing_line_file_exits_2(run_file, capsys):
    (run_file.parent / "toy.csv").unlink()
    assert main(["validate-data", "-c", str(run_file)]) == 2
    assert "toy.csv" in capsys.readouterr().err


def test_malformed_env_file_exits_2(run_file, capsys):
    (run_file.parent / "env.json").write_text('{"fleet": {"num_trains": 3, "trains_up": 1, "trains_down": 1}}')
    assert main(["baseline", "-c", str(run_file)]) == 2
    assert "env.json" in capsys.readouterr().err


def test_baseline_writes_report_and_snapshot(run_file, tmp_path):
    assert main(["baseline", "-c", str(run_file), "--seeds", "0-2", "--trace"]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "baseline.json").read_text())
    assert report["n_seeds"] == 3
    assert report["seeds"] == [0, 1, 2]
    assert len(report["episodes"]) == 3
    snapshot = json.loads((out / "config" / "run.json").read_text())
    assert snapshot["command"] == "baseline"
    assert snapshot["config_hash"] == report["config_hash"]
    assert snapshot["line_file"] == "toy.csv"
    assert (out / "config" / "toy.csv").read_text() == TOY_LINE
    assert (out / "traces" / "power_seed1.csv").exists()


def test_out_flag_overrides_run_config(run_file, tmp_path):
    assert main(["baseline", "-c", str(run_file), "-o", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "baseline.json").exists()
    assert not (tmp_path / "out").exists()


def test_train_evaluate_compare(run_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["train", "-c", str(run_file), "--iterations", "1"]) == 0
    checkpoint = out / "checkpoint.npz"
    assert checkpoint.exists()
    assert main(["train", "-c", str(run_file), "--resume", str(checkpoint), "--iterations", "2"]) == 0
    with open(out / "train_log.csv", newline="") as f:
        assert [row[0] for row in csv.reader(f)] == ["iter", "1", "2"]

    assert main(["baseline", "-c", str(run_file), "--seeds", "0-1"]) == 0
    assert main(["evaluate", "-c", str(run_file), "--checkpoint", str(checkpoint), "--seeds", "0-1"]) == 0
    capsys.readouterr()
    assert main(["compare", str(out / "baseline.json"), str(out / "policy.json"), "-o", str(tmp_path / "cmp")]) == 0
    printed = capsys.readouterr().out
    assert "traction energy reduction" in printed
    comparison = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert [row["label"] for row in comparison["rows"]] == ["baseline", "policy"]
    assert (tmp_path / "cmp" / "comparison.csv").exists()


def test_evaluate_rejects_checkpoint_from_other_config(run_file, tmp_path):
    assert main(["train", "-c", str(run_file), "--iterations", "1"]) == 0
    env = dict(ENV, reward_scale=50.0)
    (run_file.parent / "env.json").write_text(json.dumps(env))
    checkpoint = tmp_path / "out" / "checkpoint.npz"
    assert main(["evaluate", "-c", str(run_file), "--checkpoint", str(checkpoint)]) == 2


def test_compare_refuses_mismatched_configs(run_file, tmp_path, capsys):
    assert main(["baseline", "-c", str(run_file)]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "baseline.json").read_text())
    report["config_hash"] = "0" * 64
    (out / "other.json").write_text(json.dumps(report))
    assert main(["compare", str(out / "baseline.json"), str(out / "other.json")]) == 2
    assert "different configurations" in capsys.readouterr().err


def test_compare_rejects_bad_json(tmp_path):
    (tmp_path / "a.json").write_text("{")
    assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "a.json")]) == 2


def test_sweep_writes_csv(run_file, tmp_path):
    assert main(["sweep", "-c", str(run_file), "--levels", "0,0.5", "--seeds", "0"]) == 0
    with open(tmp_path / "out" / "sweep.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [(r["probability_per_stop"], r["label"]) for r in rows] == [("0.0", "baseline"), ("0.5", "baseline")]


def test_sweep_rows_carry_their_level_config_hash(run_file, tmp_path):
    assert main(["baseline", "-c", str(run_file)]) == 0
    baseline_hash = json.loads((tmp_path / "out" / "baseline.json").read_text())["config_hash"]
    assert main(["sweep", "-c", str(run_file), "--levels", "0,0.3", "--seeds", "0"]) == 0
    with open(tmp_path / "out" / "sweep.csv", newline="") as f:
        hashes = {r["probability_per_stop"]: r["config_hash"] for r in csv.DictReader(f)}
    # 0.3 is the configured level, so its rows are comparable with the baseline report
    assert hashes["0.3"] == baseline_hash
    assert hashes["0.0"] != baseline_hash


def test_env_seed_is_the_default_seed(run_file, tmp_path):
    (run_file.parent / "env.json").write_text(json.dumps(dict(ENV, seed=5)))
    assert main(["baseline", "-c", str(run_file)]) == 0
    assert json.loads((tmp_path / "out" / "baseline.json").read_text())["seeds"] == [5]
