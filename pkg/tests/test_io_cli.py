import json

import numpy as np
import pytest

from mfcontract import io
from mfcontract.cli import main


def _config(tmp_path, model, sim=None, extra=""):
    lines = ["[model]"] + [f"{k} = {v}" for k, v in model.items()]
    if sim:
        lines += ["[sim]"] + [f"{k} = {json.dumps(v)}" for k, v in sim.items()]
    p = tmp_path / "cfg.toml"
    p.write_text("\n".join(lines) + "\n" + extra)
    return p


SMALL_SIM = {"particles": 2000, "steps": 20, "seed": 42, "perturbations": 2}


def test_float_format_round_trips(tmp_path):
    x = 0.1 + 0.2
    assert io.fmt(x) == "0.30000000000000004" and float(io.fmt(x)) == x
    assert io.fmt(2.0) == "2.0" and io.fmt(3) == "3" and io.fmt(True) == "true"
    assert json.loads(io.dumps({"a": x, "b": float("nan"), "c": np.arange(2.0)})) == {"a": x, "b": None, "c": [0.0, 1.0]}
    p = io.write_csv(tmp_path / "a.csv", ("u", "v"), [(1 / 3, 2.0)])
    assert b"\r" not in p.read_bytes()
    header, rows = io.read_csv(p)
    assert header == ["u", "v"] and rows[0, 0] == 1 / 3


def test_solve_outputs_and_reruns(tmp_path):
    cfg = _config(tmp_path, {"alpha": 0.25, "m0": 1.0})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("policy.csv", "moments.csv", "contract.json", "value.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    value = json.loads((tmp_path / "a" / "value.json").read_text())
    assert value["value"] == pytest.approx(np.expm1(0.5) + np.exp(0.25), abs=1e-12)
    meta = json.loads((tmp_path / "a" / "run_meta.json").read_text())
    assert {"argv", "timestamp", "python", "numpy", "package_version"} <= set(meta)


def test_zero_horizon_solve(tmp_path):
    cfg = _config(tmp_path, {"T": 0.0, "m0": 1.0, "R0": 0.25})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    contract = json.loads((tmp_path / "o" / "contract.json").read_text())
    assert contract["mean"] == 0.25 and contract["variance"] == 0.0
    assert json.loads((tmp_path / "o" / "value.json").read_text())["value"] == pytest.approx(0.75)


def test_simulate_is_reproducible(tmp_path):
    cfg = _config(tmp_path, {"alpha": 0.25}, SMALL_SIM)
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("estimates.json", "gaussian_check.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    est = json.loads((tmp_path / "a" / "estimates.json").read_text())
    assert set(est["agent_utility"]) >= {"a_star", "plus_0.2", "minus_0.2", "zero", "random_0"}


def test_exit_codes(tmp_path):
    bad = _config(tmp_path, {"c": -1.0})
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.toml")]) == 2
    unknown = _config(tmp_path, {"alpha": 0.1}, extra="[bogus]\nx = 1\n")
    assert main(["solve", "--config", str(unknown), "--out", str(tmp_path / "o")]) == 2
    unsupported = _config(tmp_path, {"beta2": 0.5})
    assert main(["nplayer", "--config", str(unsupported), "--out", str(tmp_path / "o")]) == 2
    stuck = _config(tmp_path, {"alpha": 0.25, "beta1": 0.1, "gamma": 0.2},
                    {**SMALL_SIM, "meanfield_mode": "particle", "tol": 1e-12, "max_iter": 2})
    assert main(["simulate", "--config", str(stuck), "--out", str(tmp_path / "o")]) == 3


def test_hjb_perturbation_exit_code(tmp_path):
    cfg = _config(tmp_path, {"alpha": 0.25, "beta1": 0.1}, {"particles": 2000, "steps": 20})
    assert main(["hjb", "--config", str(cfg), "--out", str(tmp_path / "ok")]) == 0
    assert main(["hjb", "--config", str(cfg), "--out", str(tmp_path / "bad"), "--perturb", "0.01"]) == 4
    report = json.loads((tmp_path / "bad" / "verification_report.json").read_text())
    assert report["failed_checks"] == ["hjb_residual"]


def test_nplayer_and_sensitivity_commands(tmp_path):
    cfg = tmp_path / "n.json"
    cfg.write_text(json.dumps({"model": {"alpha": 0.25, "beta1": 0.1},
                               "nplayer": {"Ns": [2, 4], "games": 500, "steps": 20}}))
    assert main(["nplayer", "--config", str(cfg), "--out", str(tmp_path / "n")]) == 0
    header, rows = io.read_csv(tmp_path / "n" / "convergence.csv")
    assert header == ["N", "samples", "w1", "w1_noise_floor"] and rows.shape == (2, 4)
    s = _config(tmp_path, {"alpha": 0.25, "beta1": 0.1, "beta2": 0.5, "gamma": 0.2})
    assert main(["sensitivity", "--config", str(s), "--out", str(tmp_path / "s")]) == 0
    assert json.loads((tmp_path / "s" / "sensitivity.json").read_text())["passed"]
