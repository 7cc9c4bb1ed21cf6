import json

import numpy as np
import pytest

from berkson.acceptance import step_closed_form
from berkson.cli import config_hash, main


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_convolve_reproduces_closed_form(tmp_path):
    assert run(tmp_path, "convolve", "--k", "1", "--c", "0.25", "--sigma", "0.2", "--t", "0") == 0
    rows = np.loadtxt(tmp_path / "convolve.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(rows[:, 2] - step_closed_form(rows[:, 0], 0.0, 0.25, 0.2))) <= 1e-12
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == [str(tmp_path / "convolve.csv")]
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_missing_required_key_is_config_error(tmp_path, capsys):
    assert run(tmp_path, "convolve", "--k", "1", "--c", "0.25", "--t", "0") == 1
    assert "config.sigma" in capsys.readouterr().err


def test_unknown_flag_is_config_error(tmp_path):
    assert run(tmp_path, "convolve", "--bogus", "1") == 1


def test_bad_config_key_path(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 1, "c": 0.25, "sigma": 0.1, "t": 0, "n": [100, "lots"]}))
    assert run(tmp_path, "convolve", "--config", str(cfg)) == 1
    assert "config.n[1]" in capsys.readouterr().err
    cfg.write_text(json.dumps({"k": 1, "colour": "red"}))
    assert run(tmp_path, "convolve", "--config", str(cfg)) == 1


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 1, "c": 0.25, "sigma": 0.3, "t": 0}))
    assert run(tmp_path, "convolve", "--config", str(cfg), "--sigma", "0.2") == 0
    rows = np.loadtxt(tmp_path / "convolve.csv", delimiter=",", skiprows=1)
    assert rows[0, 0] == pytest.approx(-0.8)


def test_runtime_error_exit_code(tmp_path):
    # threshold within sigma of the edge
    assert run(tmp_path, "convolve", "--k", "1", "--c", "0.25", "--sigma", "0.2", "--t", "0.9") == 2


def test_estimate(tmp_path):
    code = run(tmp_path, "estimate", "--mode", "active", "--k", "1", "--c", "0.25", "--sigma", "0.1",
               "--n", "2000", "--t", "0.2", "--seed", "3")
    assert code == 0
    trace = json.loads((tmp_path / "estimate.json").read_text())
    assert len(trace["epochs"]) == 4
    assert trace["error"] < 0.05
    assert (tmp_path / "queries.csv").read_text().count("\n") == 2001


def test_rates(tmp_path):
    code = run(tmp_path, "rates", "--mode", "passive", "--k", "1", "--c", "0.25", "--sigma", "0.1",
               "--n", "1000,3000,10000", "--trials", "50")
    assert code == 0
    fit = json.loads((tmp_path / "rates.json").read_text())[0]["fit"]
    assert fit["theoretical_exponent"] == -0.5
    assert (tmp_path / "rates.csv").read_text().startswith("mode,k,c,sigma,n,trials,mean_error,stderr")


def test_lowerbound_and_gapscan(tmp_path):
    assert run(tmp_path, "lowerbound", "--k", "2", "--c", "0.25", "--sigma", "0.1", "--a", "0.01,0.02",
               "--n", "1000", "--mode", "active") == 0
    body = json.loads((tmp_path / "lowerbound.json").read_text())
    assert len(body["kl_reports"]) == 2 and body["rates"][0]["a_star"] > 0
    assert (tmp_path / "gap_curve.csv").exists()
    cfg = tmp_path / "scan.json"
    cfg.write_text(json.dumps({"k": 2, "c": 0.25, "sigma_grid": [0.001, 0.1], "a_grid": [0.0001, 0.01]}))
    assert run(tmp_path, "gapscan", "--config", str(cfg)) == 0
    assert json.loads((tmp_path / "gapscan.json").read_text())["passed"]


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_quick_selftest(tmp_path):
    assert run(tmp_path, "selftest", "--quick") == 0
    body = json.loads((tmp_path / "selftest.json").read_text())
    assert [c["number"] for c in body["criteria"]] == [1, 2, 3]
