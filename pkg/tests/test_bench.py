import csv
import json

import numpy as np
import pytest

from robustacg import (ExperimentConfig, convergence_probability, jackson_delay_study,
                       opportunistic_study, paper_checkpoints, run_experiment, save_scenario,
                       power_scenario)
from robustacg.bench import METRIC_COLUMNS, execution_noise
from robustacg import cli


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_zero_radius_ratio_is_one(tmp_path):
    cfg = ExperimentConfig(eps_list=[0.0], reps=3, out_dir=str(tmp_path))
    records = run_experiment(cfg)
    assert all(r.ratio == 1.0 for r in records)
    rows = _read(tmp_path / "metrics.csv")
    assert list(rows[0]) == METRIC_COLUMNS
    assert {float(r["ratio"]) for r in rows} == {1.0}


def test_unique_sweep_ratio_at_most_one():
    cfg = ExperimentConfig(eps_list=[0.1, 0.3, 0.6], reps=4, seed=3)
    for r in run_experiment(cfg):
        assert not r.error
        assert r.ratio <= 1.0 + 1e-9
        assert r.distance <= r.distance_bound


def test_replay_is_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        cfg = ExperimentConfig(eps_list=[0.0, 0.2], reps=2, seed=9, out_dir=str(tmp_path / sub))
        run_experiment(cfg)
        outs.append((tmp_path / sub / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]
    assert ExperimentConfig(seed=9, out_dir="x").config_hash == ExperimentConfig(seed=9).config_hash
    assert ExperimentConfig(seed=9).config_hash != ExperimentConfig(seed=10).config_hash


def test_records_carry_seed_and_hash(tmp_path):
    cfg = ExperimentConfig(eps_list=[0.1], reps=2, seed=4, out_dir=str(tmp_path))
    run_experiment(cfg)
    long_rows = _read(tmp_path / "metrics_long.csv")
    assert all(r["config_hash"] == cfg.config_hash and r["seed"] == "4" for r in long_rows)
    runs = json.loads((tmp_path / "runs.json").read_text())
    assert runs["config_hash"] == cfg.config_hash


def test_scenario_file_source(tmp_path):
    path = tmp_path / "s.json"
    save_scenario(power_scenario(2, 3, "unique", seed=1), path)
    records = run_experiment(ExperimentConfig(scenario_file=str(path), eps_list=[0.0, 0.2], reps=2))
    assert records[0].v_star == records[2].v_star


def test_jackson_sweep_reports_delay():
    cfg = ExperimentConfig(kind="jackson", scenario_params={"n": 3, "k": 2}, solver="gradient",
                           eps_list=[0.0, 0.2], reps=2, max_iter=300)
    records = run_experiment(cfg)
    assert all(r.delay_metric == r.delay_metric for r in records if not r.error)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(eps_list=[-0.1])
    with pytest.raises(ValueError):
        ExperimentConfig(reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(solver="newton")
    with pytest.raises(ValueError):
        ExperimentConfig(kind="optical")


def test_convergence_probability_decoupled_and_empty():
    table = convergence_probability([0, 1, 2], [0.0], [0.0])
    assert table == [(0.0, 0.0, 1.0)]
    with pytest.raises(ValueError):
        convergence_probability([], [0.0], [0.0])


def test_execution_noise_is_seeded():
    a = np.full((2, 2), 0.5)
    p1, p2 = execution_noise(3, 0.2), execution_noise(3, 0.2)
    assert np.array_equal(p1(5, a), p2(5, a))
    assert not np.array_equal(p1(5, a), p1(6, a))
    assert np.all(np.abs(p1(5, a) / a - 1) <= 0.2)


def test_delay_study_fields():
    out = jackson_delay_study(0, 0.2, max_iter=50)
    assert {"D_gradient", "D_jacobi", "D_robust", "robust_converged"} <= set(out)


def test_opportunistic_study_rows():
    rows = opportunistic_study([0, 1], "high", n=2, k=2)
    assert len(rows) == 2
    assert all(r["final"] >= r["stage1"] - 1e-12 and r["eta"] >= 0 for r in rows)


def test_checkpoints_report():
    rep = paper_checkpoints()
    assert rep["passed"]
    by_name = {c["name"]: c for c in rep["checks"]}
    assert by_name["profile distance"]["value"] == pytest.approx(0.7211, abs=5e-4)
    assert by_name["bound from the implied constant"]["value"] == pytest.approx(1.3115, abs=1e-4)
    assert by_name["utility gap estimate"]["passed"] is None


def test_cli_checkpoints_exit_codes(monkeypatch, capsys):
    assert cli.main(["checkpoints"]) == 0
    assert "PASS profile distance" in capsys.readouterr().out
    monkeypatch.setattr(cli, "paper_checkpoints",
                        lambda: {"checks": [{"name": "x", "value": 1, "expected": 2,
                                             "passed": False, "note": ""}], "passed": False})
    assert cli.main(["checkpoints"]) == 2


def test_cli_usage_error_exits_one():
    with pytest.raises(SystemExit) as info:
        cli.main(["sweep", "--eps-list", "-1"])
    assert info.value.code == 1


def test_cli_sweep_and_solve(tmp_path, capsys):
    assert cli.main(["sweep", "--reps", "2", "--eps-list", "0,0.2", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.csv").exists()
    path = tmp_path / "s.json"
    save_scenario(power_scenario(2, 2, "unique", seed=0), path)
    assert cli.main(["solve", "--scenario", str(path), "--eps-list", "0.1",
                     "--solver", "iwfa", "--out-dir", str(tmp_path)]) == 0
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["runs"]["0.1"]["converged"]
    assert cli.main(["analyze", "--scenario", str(path)]) == 0
    assert cli.main(["jackson-prob", "--reps", "1", "--eps-list", "0", "--deficits", "0"]) == 0
    assert "0.000,0.000,1.0000" in capsys.readouterr().out


def test_cli_scale_multiplies_reps(tmp_path, capsys):
    assert cli.main(["sweep", "--kind", "opportunistic", "--reps", "2", "--scale", "1.5",
                     "--out-dir", str(tmp_path)]) == 0
    rows = _read(tmp_path / "opportunistic.csv")
    assert len(rows) == 6                     # 3 seeds in each of two regimes
