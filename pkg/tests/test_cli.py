import json

import numpy as np
import pytest

from dfbsim import io
from dfbsim.cli import main

FAST = "record_stride = 1\n"


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_run_then_manifest_reproduces_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--structure", "gdcc", "--current", "30mA", "--duration", "0.3ns",
                 "--grid", "60", "--seed", "4", "--out", str(a)]) == 0
    assert io.is_complete(a)
    assert main(["run", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("timeseries.csv", "profiles.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_errors_are_reported(tmp_path, capsys):
    assert main(["run", "--structure", "gdcc", "--out", str(tmp_path)]) != 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("structure = gdcc_qws\ncurrent = 3 furlongs\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) != 0
    assert "bad.cfg:2" in capsys.readouterr().err


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DFBSIM_OUTPUT", str(tmp_path))
    assert main(["run", "--structure", "conventional", "--current", "10mA",
                 "--duration", "0.1ns", "--grid", "20"]) == 0
    assert io.is_complete(tmp_path / "run")


def test_fig2_writes_two_traces_and_summary(tmp_path):
    out = tmp_path / "fig2"
    assert main(["fig2", "--seed", "7", "--grid", "40", "--out", str(out)]) == 0
    assert io.is_complete(out)
    for s in ("conventional_qws", "gdcc_qws"):
        assert (out / f"timeseries_{s}.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert {"conventional_qws", "gdcc_qws"} <= set(summary)


def test_li_writes_curve_and_threshold_field(tmp_path):
    out = tmp_path / "li"
    assert main(["li", "--structure", "gdcc", "--from", "5mA", "--to", "40mA",
                 "--points", "15", "--grid", "30", "--duration", "1ns",
                 "--out", str(out)]) == 0
    data = np.loadtxt(out / "li_gdcc_qws.csv", delimiter=",", skiprows=1)
    assert data.shape == (15, 4)
    assert data[0, 0] == pytest.approx(5e-3) and data[-1, 0] == pytest.approx(40e-3)
    assert "threshold_A" in json.loads((out / "summary.json").read_text())["gdcc_qws"]


def test_spectrum_and_fig456_on_coarse_grid(tmp_path):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    out = tmp_path / "dyn"
    assert main(["fig456", "--grid", "120", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert "variance_ratio_conv_over_gdcc" in summary
    assert (out / "gdcc_qws" / "sigma_n.csv").exists()
    assert main(["spectrum", str(out / "gdcc_qws")]) == 0
    sp = np.loadtxt(out / "gdcc_qws" / "spectrum.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(sp[:, 1]) > 0)
