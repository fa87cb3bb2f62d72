import json
import subprocess
import sys

import numpy as np
import pytest

from preavg.cli import main
from preavg.estimators import ObservedSeries, SamplingGrid, estimate, write_csv
from preavg.simulate import ModelSpec, simulate_path

MODEL = {"volatility": {"type": "heston", "v0": 0.04, "kappa": 5.0, "vbar": 0.04, "xi": 0.5, "rho": -0.5},
         "noise": {"type": "gaussian", "c0": 0.005},
         "jumps": {"type": "compound_poisson", "rate": 2.0, "mean": 0.2, "sd": 0.05}}


def test_kernels_prints_constants(capsys):
    assert main(["kernels", "--p", "2", "--eta", "1", "--zeta", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "gbar(2) = 0.0833333333333 (1/12)" in out
    assert "151/80640" in out and "1/96" in out
    assert "rho_2 = 1, -1/2" in out


def test_kernels_two_weights(capsys):
    assert main(["kernels", "--g", "triangle", "--h", "sine", "--p", "4"]) == 0
    out = capsys.readouterr().out
    assert "Psi_4+ =" in out and "mu_bar_8(triangle,sine" in out


def test_simulate_then_estimate_is_bit_identical(tmp_path, capsys):
    cfg = tmp_path / "model.json"
    cfg.write_text(json.dumps({"model": MODEL, "n_obs": 1600, "seed": 4}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["estimate", "-i", str(tmp_path / "series.csv"), "--truth", str(tmp_path / "truth.json"),
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    series, truth = simulate_path(ModelSpec.from_dict(MODEL), SamplingGrid.from_horizon(1.0, 1600), 4)
    records = json.loads((tmp_path / "estimates.json").read_text())
    got = {r["statistic"]: r["value"] for r in records}
    assert got["quadratic_variation"] == estimate(series, "triangle", "quadratic_variation").value
    assert got["integrated_power"] == estimate(series, "triangle", "integrated_power", p=4).value
    assert got["jump_power"] == estimate(series, "triangle", "jump_power", p=4).value
    tv = json.loads((tmp_path / "truth_values.json").read_text())["truth"]
    assert tv["quadratic_variation"] == truth.quadratic_variation()


def test_estimate_constant_series(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    write_csv(ObservedSeries(np.full(401, 2.5), SamplingGrid.from_horizon(1.0, 400)), path)
    assert main(["estimate", "-i", str(path), "--p", "4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 3
    assert all(line.split()[-1] == "0" for line in out)


def test_infer_writes_records(tmp_path, capsys):
    cfg = tmp_path / "model.json"
    cfg.write_text(json.dumps({"model": {**MODEL, "jumps": {"type": "none"}}, "n_obs": 6400}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--seed", "1"]) == 0
    assert main(["infer", "-i", str(tmp_path / "series.csv"), "--truth", str(tmp_path / "truth.json"),
                 "--out", str(tmp_path)]) == 0
    recs = json.loads((tmp_path / "inference.json").read_text())
    assert [r["name"] for r in recs] == ["integrated_power_4", "quadratic_variation", "quadratic_variation",
                                         "jump_test"]
    assert recs[2]["variance"] == "oracle"
    assert "jump_test" in capsys.readouterr().out


def test_mc_small_plan(tmp_path, capsys):
    plan = {"model": {"volatility": {"type": "constant", "sigma": 0.2}}, "ladder": [400, 1600],
            "statistics": ["qv"], "replications": 4}
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    assert main(["mc", "--plan", str(path), "--out", str(tmp_path), "--workers", "1"]) == 0
    out = capsys.readouterr().out
    assert "rate qv: slope=" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["rows"]) == 2
    assert (tmp_path / "summary.csv").exists() and not (tmp_path / "raw.csv").exists()


def test_mc_failures_exit_2(tmp_path, capsys):
    plan = {"model": {"volatility": {"type": "constant", "sigma": 0.2}}, "ladder": [400],
            "statistics": ["ivp:3"], "replications": 2}
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    assert main(["mc", "--plan", str(path), "--out", str(tmp_path), "--workers", "1"]) == 2
    assert "failures" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["estimate"],
    ["estimate", "-i", "/nonexistent.csv"],
    ["simulate", "--config", "/nonexistent.json"],
    ["mc", "--plan", "no_such_plan"],
    ["kernels", "--g", "boxcar"],
    ["kernels", "--p", "four"],
])
def test_user_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "preavg", "kernels", "--p", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and "1/12" in res.stdout
