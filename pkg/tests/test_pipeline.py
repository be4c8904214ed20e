import logging
import math
from pathlib import Path

import pandas as pd
import pytest

from pipeline import main
from utils import read_report

ROOT = Path(__file__).resolve().parents[1]
SHIPPED = ROOT / "config" / "isspll.yml"


def _config(tmp_path, duration="4.0e-4", name="run.yml"):
    text = SHIPPED.read_text().replace("duration: 1.6e-3", f"duration: {duration}")
    p = tmp_path / name
    p.write_text(text)
    return p


def _same(a, b):
    return (math.isnan(a) and math.isnan(b)) or a == b


def test_fom_prints_published_value(capsys):
    assert main(["fom", "--sigma", "23.62e-12", "--power", "131.8e-6", "--area", "0.034"]) == 0
    out = capsys.readouterr().out
    assert "fom_ja_db=-236.0" in out.splitlines()
    assert any(line.startswith("fom_db=") for line in out.splitlines())


@pytest.mark.parametrize("argv", [
    ["fom", "--sigma", "23.62e-12", "--power", "0", "--area", "0.034"],
    ["fom", "--sigma", "abc", "--power", "1e-3", "--area", "1"],
    ["fom", "--sigma", "1e-12"],
])
def test_fom_invalid_input_exits_1(argv, capsys):
    assert main(argv) == 1


def test_simulate_locks_and_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(SHIPPED), "--seed", "1", "--out", str(out), "--duration", "4e-4"]) == 0
    assert (out / "trace.csv").exists()
    summary = read_report(out / "summary.txt")
    assert summary["locked"] == 1
    assert abs(summary["f_error_ppm"]) < 10
    assert f"Wrote {out / 'trace.csv'}" in capsys.readouterr().out


def test_simulate_too_short_exits_2_with_outputs(tmp_path):
    out = tmp_path / "short"
    assert main(["simulate", "--config", str(SHIPPED), "--seed", "1", "--out", str(out), "--duration", "2e-5"]) == 2
    assert (out / "trace.csv").exists() and (out / "summary.txt").exists()
    assert read_report(out / "summary.txt")["locked"] == 0


def test_simulate_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yml"
    bad.write_text("loop:\n  f_ref: 25.0e6\n  t_pul: 50.0e-9\n")
    assert main(["simulate", "--config", str(bad), "--seed", "1", "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "t_pul < 1/f_ref" in err and f"{bad}:3" in err


def test_analyze_reproduces_summary(tmp_path):
    cfg = _config(tmp_path)
    sim, ana = tmp_path / "sim", tmp_path / "ana"
    assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(sim)]) == 0
    assert main(["analyze", "--config", str(cfg), "--trace", str(sim / "trace.csv"), "--out", str(ana)]) == 0
    assert (sim / "summary.txt").read_text() == (ana / "summary.txt").read_text()


def test_design_reports_positive_margin(capsys):
    assert main(["design", "--config", str(SHIPPED)]) == 0
    rep = dict(line.split("=", 1) for line in capsys.readouterr().out.split())
    assert float(rep["pm_deg"]) > 0
    assert float(rep["ugb_hz"]) == pytest.approx(514e3, rel=0.02)


def test_sweep_pulse_width(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "sweep"
    argv = ["sweep", "--config", str(cfg), "--param", "t_pul", "--from", "1e-9", "--to", "3e-9",
            "--steps", "3", "--out", str(out), "--workers", "2"]
    assert main(argv) == 0
    df = pd.read_csv(out / "sweep.csv")
    assert list(df.columns[:1]) == ["t_pul"]
    assert df["t_pul"].tolist() == pytest.approx([1e-9, 2e-9, 3e-9])
    assert (df["locked"] == 1).all()
    assert (out / "sweep.xlsx").exists()


def test_sweep_bias_scales_detector_gain(tmp_path):
    cfg = _config(tmp_path, duration="4.0e-5")
    out = tmp_path / "bias"
    assert main(["sweep", "--config", str(cfg), "--param", "i_bias", "--from", "10e-6", "--to", "40e-6",
                 "--steps", "2", "--out", str(out)]) == 0
    k = pd.read_csv(out / "sweep.csv")["k_pd_i_A_per_rad"].tolist()
    assert k[1] / k[0] == pytest.approx(4.0)


def test_single_step_sweep_matches_simulate(tmp_path):
    cfg = _config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "sim")]) == 0
    assert main(["sweep", "--config", str(cfg), "--param", "seed", "--from", "1", "--to", "1",
                 "--steps", "1", "--out", str(tmp_path / "one")]) == 0
    row = pd.read_csv(tmp_path / "one" / "sweep.csv", float_precision="round_trip").iloc[0]
    summary = read_report(tmp_path / "sim" / "summary.txt")
    assert all(_same(float(row[k]), v) for k, v in summary.items())


def test_sweep_rejects_non_numeric_key(tmp_path, capsys):
    assert main(["sweep", "--config", str(SHIPPED), "--param", "detrend", "--from", "0", "--to", "1",
                 "--steps", "2", "--out", str(tmp_path / "x")]) == 1
    assert "not a numeric config key" in capsys.readouterr().err


def test_help_lists_config_keys(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    assert "t_pul" in out and "[Hz/V]" in out


def test_sweep_over_integer_analysis_key(tmp_path):
    cfg = _config(tmp_path, duration="4.0e-5")
    out = tmp_path / "seg"
    assert main(["sweep", "--config", str(cfg), "--param", "segment_len", "--from", "1024", "--to", "2048",
                 "--steps", "2", "--out", str(out)]) == 0
    assert pd.read_csv(out / "sweep.csv")["segment_len"].tolist() == [1024, 2048]


def test_verbose_selects_debug_logging(monkeypatch):
    seen = {}
    monkeypatch.setattr(logging, "basicConfig", lambda **kw: seen.update(kw))
    assert main(["-v", "fom", "--sigma", "23.62e-12", "--power", "131.8e-6", "--area", "0.034"]) == 0
    assert seen["level"] == logging.DEBUG
    assert main(["fom", "--sigma", "23.62e-12", "--power", "131.8e-6", "--area", "0.034"]) == 0
    assert seen["level"] == logging.WARNING
