import io
import json
import subprocess
import sys

import numpy as np
import pytest

from gmsransac.bench import COLUMNS, read_csv, read_jsonl
from gmsransac.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_csv_to_stdout(capsys):
    code, out, _ = run(capsys, "run", "--repeats", "2", "--seed", "4", "--method", "gms_ransac_uniform")
    assert code == 0
    rows = read_csv(io.StringIO(out))
    assert [r.seed for r in rows] == [4, 5]
    assert out.splitlines()[0] == ",".join(COLUMNS)


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("source = synthetic\nn_inliers = 1500\nn_outliers = 500\nratio = 1/4\n"
                   "repeats = 3\nhardware = test-box\nseeds = 7, 8, 9\n")
    out = tmp_path / "o.jsonl"
    code, _, _ = run(capsys, "run", "--config", str(cfg), "--ratio", "1/2", "--format", "jsonl",
                     "--out", str(out), "--single-worker")
    assert code == 0
    rows = read_jsonl(out.open())
    assert [r.seed for r in rows] == [7, 8, 9]
    assert all(r.ratio == "1/2" and r.hardware == "test-box" and r.matches_raw == 2000 for r in rows)


def test_failed_row_exit_code(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("n_inliers = 2\nn_outliers = 0\n")
    code, out, err = run(capsys, "run", "--config", str(cfg))
    assert code == 1 and "TooFewMatches" in err
    assert read_csv(io.StringIO(out))[0].status == "failed"


@pytest.mark.parametrize("argv", [["run", "--ratio", "7/3"], ["run", "--config", "/nonexistent.cfg"],
                                  ["run", "--repeats", "0"], ["synth", "--config", "/dev/null",
                                                              "--method", "gms_ransac_uniform"]])
def test_config_errors_exit_2(argv, capsys, tmp_path):
    if argv[0] == "synth":
        cfg = tmp_path / "w.cfg"
        cfg.write_text("source = warp\n")
        argv = ["synth", "--config", str(cfg)]
    code, _, err = run(capsys, *argv)
    assert code == 2 and "config error" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_sweep_presets_summary(tmp_path, capsys):
    cfg = tmp_path / "w.cfg"
    cfg.write_text("source = warp\nwidth = 320\nheight = 240\nscene_seed = 1\n")
    summary = tmp_path / "sum.json"
    code, out, _ = run(capsys, "sweep-presets", "--config", str(cfg), "--presets", "400,800",
                       "--summary", str(summary))
    assert code == 0
    assert len(read_csv(io.StringIO(out))) == 2
    assert json.loads(summary.read_text())["kind"] == "preset_sweep"


def test_sweep_ratios_and_compare(capsys):
    code, out, _ = run(capsys, "sweep-ratios", "--ratios", "1/3,1/2", "--presets", "1000,2000")
    assert code == 0 and len(read_csv(io.StringIO(out))) == 4
    code, out, err = run(capsys, "compare", "--repeats", "2")
    assert code == 0
    assert {r.method for r in read_csv(io.StringIO(out))} == {"gms_ransac_uniform", "gms_ransac_prioritized"}
    assert json.loads(err)["kind"] == "comparison"


def test_synth_writes_labelled_points(tmp_path, capsys):
    out = tmp_path / "pts.csv"
    code, _, _ = run(capsys, "synth", "--seed", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    h = np.array([float(v) for v in lines[0].split()[2:]]).reshape(3, 3)
    assert lines[1] == "xa,ya,xb,yb,inlier"
    data = np.loadtxt(lines[2:], delimiter=",")
    assert data.shape == (2000, 5) and data[:, 4].sum() == 1000
    pa = np.c_[data[:, :2], np.ones(2000)] @ h.T
    err = np.linalg.norm(pa[:, :2] / pa[:, 2:] - data[:, 2:4], axis=1)
    assert np.all(err[data[:, 4] == 0] >= 3.0)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "gmsransac.cli", "run", "--ratio", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 2
