import subprocess
import sys
from pathlib import Path

import pytest

from fillsim.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TY_CONFIG = str(CONFIGS / "ty_1s.cfg")


def test_theory_prints_drift(capsys):
    assert main(["theory", "--config", TY_CONFIG]) == 0
    out = capsys.readouterr().out
    assert "drift_given_fill_ticks=-0.48554672" in out
    assert "drift_given_fill_ticks_2dp=-0.49" in out


def test_theory_gchp(capsys):
    assert main(["theory", "--config", str(CONFIGS / "gchp.cfg"), "--model", "gchp"]) == 0
    assert "drift_given_fill_ticks=-0.6" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--model", "umd", "--steps", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["nosuch"]) == 2
    assert main([]) == 2
    assert main(["backtest", "--events", "x", "--technique", "9", "--out", "y"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("unknown_key=1\n")
    assert main(["theory", "--config", str(bad)]) == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert main(["backtest", "--events", str(tmp_path / "missing.csv"), "--technique", "1",
                 "--out", str(tmp_path / "r.txt")]) == 1
    assert "missing.csv" in capsys.readouterr().err


def test_pipeline(tmp_path, capsys):
    ev, rep = tmp_path / "ev.csv", tmp_path / "bt.txt"
    assert main(["simulate", "--model", "umd", "--config", TY_CONFIG, "--steps", "30000", "--seed", "1",
                 "--out", str(ev)]) == 0
    assert main(["backtest", "--events", str(ev), "--technique", "3", "--config", TY_CONFIG, "--seed", "2",
                 "--out", str(rep)]) == 0
    assert main(["calibrate", "--events", str(ev), "--lifecycle", str(tmp_path / "bt.lifecycle.csv"),
                 "--resample", "1", "--out", str(tmp_path / "cal.txt")]) == 0
    assert "r_f=" in (tmp_path / "cal.txt").read_text()
    assert main(["drift", "--report", str(rep), "--events", str(ev), "--window", "100",
                 "--out", str(tmp_path / "drift")]) == 0
    assert (tmp_path / "drift" / "drift_summary.txt").exists()
    assert main(["compare", "--events", str(ev), "--config", TY_CONFIG, "--seeds", "1,2",
                 "--out", str(tmp_path / "cmp")]) == 0
    table = (tmp_path / "cmp" / "comparison.csv").read_text().splitlines()
    assert table[0].startswith("seed,technique,n_orders,n_fills,global_fill_rate")
    assert len(table) == 1 + 2 * 4
    assert (tmp_path / "cmp" / "pnl_windows_seed2.csv").exists()


def test_simulate_gchp(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["simulate", "--model", "gchp", "--config", str(CONFIGS / "gchp.cfg"), "--steps", "500",
                 "--seed", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 2 + 500


def test_cli_outputs_are_deterministic(tmp_path):
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        main(["simulate", "--model", "umd", "--config", TY_CONFIG, "--steps", "5000", "--seed", "4",
              "--out", str(d / "ev.csv")])
        main(["backtest", "--events", str(d / "ev.csv"), "--technique", "ground-truth", "--config", TY_CONFIG,
              "--seed", "4", "--out", str(d / "r.txt")])
    for name in ("ev.csv", "r.txt", "r.lifecycle.csv", "r.fills.csv", "r.pnl.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fillsim", "theory", "--config", TY_CONFIG],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "drift_given_fill_ticks" in res.stdout
