from __future__ import annotations

import json
import math

import numpy as np
import pytest

from cmsvkit.cli import main
from cmsvkit.ensembles import EnsembleSpec, generate
from cmsvkit.matrix import load_matrix, save_matrix


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_matrix(tmp_path, A, name="a.csv"):
    from cmsvkit.matrix import MeasurementMatrix

    path, _ = save_matrix(MeasurementMatrix(np.asarray(A, float)), tmp_path / name)
    return str(path)


def test_gen_matrix_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "gen-matrix", "--kind", "gaussian", "--n", "12", "--m", "4", "--seed", "3", "--out", str(a))[0] == 0
    assert run(capsys, "gen-matrix", "--kind", "gaussian", "--n", "12", "--m", "4", "--seed", "3", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ref = generate(EnsembleSpec("gaussian", 4, 12, 3)).entries
    assert np.array_equal(load_matrix(a).entries, ref)


def test_gen_matrix_bad_hadamard_size(tmp_path, capsys):
    code, _, err = run(capsys, "gen-matrix", "--kind", "partial_hadamard", "--n", "6", "--m", "2",
                       "--out", str(tmp_path / "h.csv"))
    assert code == 2 and "power of 2" in err


def test_usage_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["cmsv"])
    assert exc.value.code == 2


def test_cmsv_identity(tmp_path, capsys):
    path = write_matrix(tmp_path, np.eye(4))
    code, out, _ = run(capsys, "cmsv", "--matrix", path, "--q", "2", "--s", "2", "--restarts", "8")
    d = json.loads(out)
    assert code == 0 and d["value"] == pytest.approx(1.0, abs=1e-9) and d["method"] == "multistart"


def test_cmsv_oracle_refuses_large_n(tmp_path, capsys):
    path = write_matrix(tmp_path, generate(EnsembleSpec("gaussian", 4, 12, 0)).entries)
    code, _, err = run(capsys, "cmsv", "--matrix", path, "--q", "2", "--s", "2", "--oracle")
    assert code == 2 and "N <= 10" in err


def test_cmsv_oracle_small(tmp_path, capsys):
    path = write_matrix(tmp_path, [[1.0, 0, 0], [0, 1.0, 0]])
    code, out, _ = run(capsys, "cmsv", "--matrix", path, "--q", "2", "--s", "1.5", "--oracle", "--samples", "1000")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.0, abs=1e-12)


def test_solve(tmp_path, capsys):
    path = write_matrix(tmp_path, np.eye(3))
    y = tmp_path / "y.txt"
    y.write_text("1 0 -2\n")
    code, out, _ = run(capsys, "solve", "--matrix", path, "--y", str(y))
    d = json.loads(out)
    assert code == 0 and d["status"] == "converged"
    assert np.allclose(d["x_hat"], [1, 0, -2], atol=1e-9) and d["gap"] <= 1e-9


def test_certify_external_rho(capsys):
    code, out, _ = run(capsys, "certify", "--q", "inf", "--k", "2", "--rho", "0.25", "--s", "8", "--epsilon", "0.1")
    d = json.loads(out)
    assert code == 0 and d["stable_ok"] and d["l1_bound"] == pytest.approx(6.4) and d["empirical_flag"] is False


def test_certify_level_too_large(tmp_path, capsys):
    path = write_matrix(tmp_path, generate(EnsembleSpec("gaussian", 4, 12, 0)).entries)
    code, _, err = run(capsys, "certify", "--q", "2", "--k", "1", "--matrix", path)
    assert code == 2 and "exceeds" in err


def test_certify_lower_bound_method(tmp_path, capsys):
    from _instances import hadamard_minus_rows

    path = write_matrix(tmp_path, hadamard_minus_rows(32))
    code, out, _ = run(capsys, "certify", "--q", "inf", "--k", "3", "--matrix", path, "--method", "lower-bound")
    d = json.loads(out)
    assert code == 0 and d["stable_ok"] and d["s_used"] == pytest.approx(12)


def test_min_measurements(capsys):
    code, out, _ = run(capsys, "min-measurements", "--delta", "2", "--k", "2", "--n", "256", "--q", "2")
    assert code == 0 and out.split() == ["1067897", "q>=2"]


def test_min_measurements_unreachable(capsys):
    code, _, err = run(capsys, "min-measurements", "--delta", "4", "--k", "50", "--n", "1000000",
                       "--M", "0.1", "--C", "10", "--q", "2")
    assert code == 3 and "unreachable" in err


def test_min_measurements_bad_q(capsys):
    code, _, _ = run(capsys, "min-measurements", "--delta", "2", "--k", "2", "--n", "64", "--q", "1")
    assert code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "cmsvkit" in capsys.readouterr().out
