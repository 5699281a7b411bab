import csv
import shutil

import numpy as np
import pytest

from conftest import write_config
from nnadp import Mlp, Trajectory
from nnadp.cli import main
from nnadp.geometry import load_polytope
from nnadp.pipeline import Dataset


def small_config(path, **extra):
    return write_config(
        path,
        horizon=2,
        training={"q_per_stage": 30, "q_policy": 20, "hidden": [4], "max_epochs": 10},
        **extra,
    )


@pytest.fixture
def copied_run(pipeline_run, tmp_path):
    out = tmp_path / "run"
    shutil.copytree(pipeline_run["out"] / "models", out / "models")
    return out


def test_usage_errors_map_to_config_exit():
    assert main([]) == 1
    assert main(["simulate", "--controller", "magic", "--x0", "1,1"]) == 1
    assert main(["--help"]) == 0


def test_sets_benchmark(tmp_path):
    assert main(["sets", "--out", str(tmp_path)]) == 0
    files = sorted((tmp_path / "sets").glob("X_*.json"))
    assert len(files) == 7
    rows = list(csv.DictReader(open(tmp_path / "sets" / "summary.csv")))
    assert all(r["nested_in_previous"] == "true" for r in rows)
    P = load_polytope(tmp_path / "sets" / "X_0.json")
    assert P.m == int(rows[0]["rows"])


def test_sets_short_horizon(tmp_path):
    cfg = write_config(tmp_path / "c.json", horizon=1)
    assert main(["sets", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len(list((tmp_path / "sets").glob("X_*.json"))) == 2


def test_sets_infeasible(tmp_path):
    cfg = write_config(
        tmp_path / "c.json",
        system={"A": [[0, 0], [0, 0]], "B": [[1, 0], [0, 1]]},
        constraints={
            "X": {"H": [[1, 0], [0, 1], [-1, 0], [0, -1]], "h": [10, 10, 10, 10]},
            "U": {"H": [[1, 0], [0, 1], [-1, 0], [0, -1]], "h": [1, 1, 1, 1]},
            "X_N": {"H": [[1, 0], [0, 1], [-1, 0], [0, -1]], "h": [9, 9, -9, -9]},
        },
    )
    assert main(["sets", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_bad_config_exit(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{ not json")
    assert main(["sets", "--config", str(p), "--out", str(tmp_path)]) == 1


def test_policy_needs_value_models(tmp_path):
    assert main(["train-policy", "--out", str(tmp_path)]) == 1
    assert main(["simulate", "--controller", "policy", "--x0", "1,1", "--out", str(tmp_path)]) == 1


def test_small_training_is_deterministic(tmp_path):
    cfg = small_config(tmp_path / "c.json")
    for run in ("a", "b"):
        out = str(tmp_path / run)
        assert main(["train-value", "--config", cfg, "--out", out, "--jobs", "2"]) == 0
        assert main(["train-policy", "--config", cfg, "--out", out, "--jobs", "1"]) == 0
    for name in ("value_1.json", "policy.json", "policy_dataset.csv"):
        assert (tmp_path / "a" / "models" / name).read_bytes() == (tmp_path / "b" / "models" / name).read_bytes()
    assert Mlp.load(tmp_path / "a" / "models" / "policy.json").n_out == 8
    ds = Dataset.from_csv(tmp_path / "a" / "models" / "policy_dataset.csv")
    assert ds.count == 20 and ds.meta["coords"] == "wachspress"


def test_seed_flag_changes_models(tmp_path):
    cfg = small_config(tmp_path / "c.json")
    main(["train-value", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["train-value", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "models" / "value_1.json").read_bytes()
    b = (tmp_path / "b" / "models" / "value_1.json").read_bytes()
    assert a != b


def test_simulate(copied_run):
    out = str(copied_run)
    assert main(["simulate", "--controller", "exact", "--x0", "6.75,9", "--out", out, "--svg"]) == 0
    traj = Trajectory.from_csv(copied_run / "trajectories" / "exact_6.75_9.csv")
    assert traj.states.shape == (13, 2)
    svg = (copied_run / "trajectories" / "exact_6.75_9.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    assert main(["simulate", "--controller", "exact", "--x0", "0,0", "--out", out]) == 0
    zero = Trajectory.from_csv(copied_run / "trajectories" / "exact_0_0.csv")
    assert np.all(zero.states == 0)


def test_simulate_errors(copied_run):
    out = str(copied_run)
    assert main(["simulate", "--controller", "exact", "--x0", "10,10", "--out", out]) == 2
    assert main(["simulate", "--controller", "exact", "--x0", "1,a", "--out", out]) == 1
    assert main(["simulate", "--controller", "exact", "--x0", "1,2,3", "--out", out]) == 1


def test_compare_threshold_exit(copied_run, tmp_path):
    cfg = write_config(tmp_path / "c.json", simulation={"suboptimality_threshold": 0.0})
    assert main(["compare", "--config", cfg, "--out", str(copied_run)]) == 3


def test_compare_report(pipeline_run):
    assert pipeline_run["codes"]["compare"] == 0
    rows = list(csv.DictReader(open(pipeline_run["out"] / "compare" / "report.csv")))
    assert len(rows) == 6
    assert {r["controller"] for r in rows} == {"exact", "value", "policy"}
    for r in rows:
        assert float(r["max_input_violation"]) <= 1e-8
        assert float(r["max_state_violation"]) <= 1e-8
    for name in ("timing.csv", "compare_6.75_9.svg"):
        assert (pipeline_run["out"] / "compare" / name).exists()
    for p in (pipeline_run["out"] / "compare").glob("*_*.csv"):
        if p.name not in ("report.csv", "timing.csv"):
            Trajectory.from_csv(p)
