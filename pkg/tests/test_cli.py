import json
import subprocess
import sys

import numpy as np
import pytest

from sparsepce.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from sparsepce.matrix import MeasurementMatrix, dump_matrix
from sparsepce.sampling import read_ensemble_csv


def test_sample_then_recover(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sample", "--problem", "2", "--strategy", "coh", "--m", "120", "--seed", "3", "--burn-in", "100",
                 "--out", str(out)]) == EXIT_OK
    ens = read_ensemble_csv(out, "legendre")
    assert ens.points.shape == (120, 20) and (ens.weights < 1).any()
    coef = tmp_path / "c.csv"
    assert main(["recover", "--problem", "2", "--samples", str(out), "--out", str(coef)]) == EXIT_OK
    diag = json.loads(capsys.readouterr().out)
    assert diag["converged"] and diag["relative_error"] < 1e-8
    lines = coef.read_text().splitlines()
    assert lines[0].startswith("index,alpha_1") and len(lines) == 232


def test_sample_to_stdout_is_deterministic(capsys):
    args = ["sample", "--problem", "1", "--strategy", "standard", "--m", "5", "--seed", "9"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first
    assert first.splitlines()[0] == "xi_1,xi_2,weight" and len(first.splitlines()) == 6


def test_near_optimal_sample_and_metrics(tmp_path, capsys):
    mat = tmp_path / "m.bin"
    assert main(["sample", "--problem", "3", "--strategy", "near", "--m", "30", "--seed", "1", "--pool-size", "200",
                 "--burn-in", "50", "--matrix-out", str(mat), "--out", str(tmp_path / "s.csv")]) == EXIT_OK
    capsys.readouterr()
    assert main(["metrics", "--matrix", str(mat)]) == EXIT_OK
    m = json.loads(capsys.readouterr().out)
    assert 0 < m["gamma"] <= m["mu"] ** 2 <= 1 and m["spark_lower_bound"] == pytest.approx(1 + 1 / m["mu"])
    assert main(["sample", "--problem", "3", "--strategy", "near", "--m", "30", "--seed", "1", "--pool-size", "20"]) \
        == EXIT_CONFIG


def test_metrics_formats(tmp_path, capsys):
    np.savetxt(tmp_path / "a.csv", [[1, 1, 0], [0, 1, 1]], delimiter=",")
    assert main(["metrics", "--matrix", str(tmp_path / "a.csv"), "--t", "0.4"]) == EXIT_OK
    m = json.loads(capsys.readouterr().out)
    assert m["mu"] == pytest.approx(2**-0.5) and m["mu_t"] == pytest.approx(2**-0.5)
    dump_matrix(tmp_path / "i.bin", MeasurementMatrix.from_array(np.eye(3)))
    main(["metrics", "--matrix", str(tmp_path / "i.bin")])
    m = json.loads(capsys.readouterr().out)
    assert m["mu"] == 0 and m["mu_t"] is None and m["spark_lower_bound"] is None


def test_benchmark(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = highd_lowk\nstrategy = standard\nm_grid = 40 60\ntrials = 2\nseed = 1\n")
    assert main(["benchmark", "--config", str(cfg)]) == EXIT_OK
    first = (tmp_path / "run.cfg.csv").read_text()
    assert json.loads((tmp_path / "run.cfg.csv.json").read_text())["config"]["seed"] == 1
    assert "median" in capsys.readouterr().out
    monkeypatch.setenv("SPARSEPCE_SEED", "2")
    assert main(["benchmark", "--config", str(cfg), "--out", str(tmp_path / "b.csv")]) == EXIT_OK
    assert (tmp_path / "b.csv").read_text() != first
    assert json.loads((tmp_path / "b.csv.json").read_text())["config"]["seed"] == 2


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("problem = 2\nstrategy = std\nm_grid = 50, 10\n")
    assert main(["benchmark", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["benchmark", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["sample", "--problem", "7", "--strategy", "std", "--m", "3", "--seed", "0"]) == EXIT_CONFIG
    assert main(["metrics", "--matrix", str(tmp_path / "nothing.bin")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["sample", "--problem", "1"])
    assert exc.value.code == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["recover", "--problem", "1", "--samples", "x", "--epsilon", "-1"])
    assert exc.value.code == EXIT_CONFIG


def test_recover_reports_runtime_failure(tmp_path, capsys, monkeypatch):
    from sparsepce import cli
    from sparsepce.solver import RecoveryResult

    s = tmp_path / "s.csv"
    main(["sample", "--problem", "1", "--strategy", "standard", "--m", "10", "--seed", "0", "--out", str(s)])
    monkeypatch.setattr(cli, "recover", lambda spec: RecoveryResult(np.zeros(231), 1.0, 0.0, 5, False, "iteration limit"))
    assert main(["recover", "--problem", "1", "--samples", str(s)]) == EXIT_RUNTIME
    monkeypatch.setattr(cli, "recover", lambda spec: 1 / 0)
    assert main(["recover", "--problem", "1", "--samples", str(s)]) == EXIT_RUNTIME


def test_validate_and_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sparsepce.cli", "validate"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = proc.stdout.splitlines()
    assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)


def test_validate_failure_exit_code(monkeypatch, capsys):
    from sparsepce import selfcheck

    monkeypatch.setattr(selfcheck, "CHECKS", (lambda: selfcheck.CheckResult("x", False, "forced"),))
    assert main(["validate"]) == EXIT_RUNTIME
    assert "FAIL" in capsys.readouterr().out
