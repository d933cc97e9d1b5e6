import json
import subprocess
import sys

import pytest

from passive_bb84 import io as pio
from passive_bb84.cli import dispatch


@pytest.fixture
def stats_file(tmp_path, capsys):
    assert dispatch(["expected", "--length", "0"]) == 0
    path = tmp_path / "s.csv"
    path.write_text(capsys.readouterr().out)
    return path


def test_verify_povm(capsys):
    assert dispatch(["verify-povm", "--nmax", "4", "--trials", "20", "--seed", "7"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and all(line.endswith("PASS") for line in out)


def test_rate_json(stats_file, capsys):
    assert dispatch(["rate", "--stats", str(stats_file)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["valid"] is True
    assert rep["R"] == pytest.approx(0.083946325416967978, rel=1e-12)
    assert dispatch(["rate", "--stats", str(stats_file), "--virtual"]) == 0
    assert json.loads(capsys.readouterr().out)["R"] > rep["R"]


def test_rate_active(tmp_path, capsys):
    assert dispatch(["expected", "--length", "0", "--active"]) == 0
    path = tmp_path / "a.csv"
    path.write_text(capsys.readouterr().out)
    assert dispatch(["rate", "--stats", str(path), "--active"]) == 0
    assert json.loads(capsys.readouterr().out)["kind"].startswith("active")


def test_missing_stats_is_io_error(tmp_path, capsys):
    assert dispatch(["rate", "--stats", str(tmp_path / "missing.csv")]) == 3
    assert "missing.csv" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    assert dispatch(["bogus"]) == 1
    assert dispatch(["rate"]) == 1


def test_malformed_inputs_exit_1(tmp_path, stats_file):
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("{not json")
    assert dispatch(["rate", "--config", str(bad_cfg), "--stats", str(stats_file)]) == 1
    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("a,b\n1,2\n")
    assert dispatch(["rate", "--stats", str(bad_csv)]) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"receiver": {"p_Z": 0.4}}))
    assert dispatch(["expected", "--config", str(cfg)]) == 1


def test_expected_roundtrip(capsys):
    assert dispatch(["expected", "--length", "25"]) == 0
    obs = pio.stats_from_csv(capsys.readouterr().out)
    assert 0 < obs.Q_Z_total < 1


def test_flat_config(tmp_path, capsys):
    cfg = tmp_path / "flat.json"
    cfg.write_text(json.dumps({"p_Z": 0.8, "d": 1e-6, "eta_Z": 0.6, "eta_X": 0.3,
                               "mu": 0.4, "nu": 0.05, "length_km": 10}))
    assert dispatch(["expected", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("intensity_tag,")


def test_simulate_deterministic(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    args = ["simulate", "--rounds", "100000", "--seed", "3", "--stats-out", str(out)]
    assert dispatch(args) == 0
    first = capsys.readouterr().out
    assert dispatch(args) == 0
    assert capsys.readouterr().out == first
    doc = json.loads(first)
    assert sum(doc["rounds"].values()) == 100000
    pio.load_stats(out)


def test_simulate_resolved(capsys):
    assert dispatch(["simulate", "--rounds", "20000", "--resolve"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert sum(d["count"] for d in doc["diagnostics"]) == 20000


def test_sweep_small(tmp_path, capsys):
    cfg = tmp_path / "sw.json"
    cfg.write_text(json.dumps({"sweep": {"lengths": [0, 50], "p_Z_grid": [0.8, 0.9],
                                         "mu_grid": {"start": 0.3, "stop": 0.5, "step": 0.1}}}))
    out = tmp_path / "t.csv"
    assert dispatch(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "length_km,variant,p_Z,mu,R,valid,h_arg"
    assert len(lines) == 1 + 2 * 4


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "passive_bb84.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("rate", "expected", "simulate", "verify-povm", "sweep"):
        assert sub in res.stdout
