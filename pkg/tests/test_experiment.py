from __future__ import annotations

import csv
import dataclasses
import json

import pytest

from cmsvkit import experiment
from cmsvkit.certify import s_required
from cmsvkit.cli import main
from cmsvkit.cmsv import CmsvEstimate
from cmsvkit.errors import DomainError
from cmsvkit.experiment import COLUMNS, ExperimentConfig, run_experiment, rows_to_csv, trial_seed

BASE = {
    "ensemble": {"kind": "gaussian", "N": 20},
    "m_grid": [6, 12],
    "k_grid": [1, 2],
    "q_grid": [2, "inf"],
    "epsilon_grid": [0.0],
    "signal": {"law": "gaussian"},
    "trials": 3,
    "master_seed": 7,
}


def config(**over):
    return ExperimentConfig.from_dict({**BASE, **over})


def test_trial_seeds_distinct_and_stable():
    seeds = {trial_seed(1, i, t, r) for i in range(4) for t in range(4) for r in ("matrix", "signal")}
    assert len(seeds) == 32
    assert trial_seed(1, 2, 3, "noise") == trial_seed(1, 2, 3, "noise")


def test_csv_identical_across_worker_counts():
    cfg = config()
    one = rows_to_csv(run_experiment(cfg, workers=1)[0])
    two = rows_to_csv(run_experiment(cfg, workers=2)[0])
    assert one == two
    assert one.splitlines()[0].split(",") == list(COLUMNS)
    assert len(one.splitlines()) == 1 + 8 * 3


def test_single_trial_trivial_success():
    cfg = config(m_grid=[20], k_grid=[1], q_grid=[2], trials=1)
    rows, _ = run_experiment(cfg, workers=1)
    assert rows[0]["success"] is True and rows[0]["solver_status"] == "converged"


def test_config_validation():
    with pytest.raises(DomainError):
        config(k_grid=[0])
    with pytest.raises(DomainError):
        config(q_grid=[1])
    with pytest.raises(DomainError):
        config(rho={"mode": "oracle"})
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict({"m_grid": [2]})


def test_outputs_and_plot(tmp_path, capsys):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({**BASE, "rho": {"mode": "multistart", "restarts": 4, "iterations": 50}}))
    out = tmp_path / "res" / "run.csv"
    code = main(["experiment", "--config", str(cfgfile), "--out", str(out), "--workers", "1", "--plot"])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 24 and all(r["schema_version"] == "1" for r in rows)
    summary = json.loads((tmp_path / "res" / "run.summary.json").read_text())
    assert summary["rows"] == 24 and len(summary["groups"]) == 8
    assert all(g["trials"] == 3 for g in summary["groups"])
    # multistart values are upper estimates, so they never trigger violations
    assert summary["bound_violations"] == 0
    timings = (tmp_path / "res" / "run.timings.csv").read_text().splitlines()
    assert timings[0] == "tuple_index,trial,wall_time_s" and len(timings) == 25
    png = tmp_path / "res" / "run.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "success=" in capsys.readouterr().out


def test_missing_output_path(tmp_path, capsys):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps(BASE))
    assert main(["experiment", "--config", str(cfgfile)]) == 2


def test_violation_exit_code(tmp_path, monkeypatch, capsys):
    # an inflated oracle-grade rho shrinks the noise bound below the noise-driven error
    def fake_rho(A, q, k, mode, budget, seed):
        return CmsvEstimate(q, s_required(q, k, 4.0), 1e6, A[0] * 0, "oracle", 1, 1.0)

    monkeypatch.setattr(experiment, "_compute_rho", fake_rho)
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({**BASE, "m_grid": [6], "k_grid": [2], "q_grid": [2], "trials": 2,
                                   "epsilon_grid": [0.1], "signal": {"law": "gaussian"},
                                   "rho": {"mode": "lower_bound"}, "ensemble": {"kind": "gaussian", "N": 40}}))
    code = main(["experiment", "--config", str(cfgfile), "--out", str(tmp_path / "v.csv"), "--workers", "1"])
    assert code == 4
    assert "bound violations" in capsys.readouterr().err


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CMSVKIT_THREADS", "3")
    assert experiment.worker_count() == 3
    monkeypatch.setenv("CMSVKIT_THREADS", "x")
    with pytest.raises(DomainError):
        experiment.worker_count()
