import csv
import json
import math
import subprocess
import sys

import pytest

from magspec.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main, read_config_file

TINY_3D = ["--R", "8", "--T", "8", "--nr", "7", "--nt", "7"]


def _read(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    config = json.loads(lines[0][len("# config: "):])
    rows = list(csv.DictReader(lines[1:]))
    return config, rows


def _no_nonfinite(text):
    low = text.lower()
    return "nan" not in low and "inf" not in low


def test_helical_table(tmp_path, capsys):
    out = tmp_path / "hel.csv"
    assert main(["helical", "--tau", "0.1", "--samples", "20", "--out", str(out)]) == EXIT_OK
    config, rows = _read(out)
    assert len(rows) == 80
    assert config["tau"] == 0.1 and config["backend"] in ("numba", "numpy")
    assert all(r["status"] == "ok" for r in rows)
    assert "regime: sub-threshold" in capsys.readouterr().out


def test_byte_identical_rerun(tmp_path):
    out = tmp_path / "a.csv"
    args = ["asympt", "--tau", "1.0", "--h", "1e-2,1e-3", "--out", str(out)]
    assert main(args) == EXIT_OK
    first = out.read_bytes()
    assert main(args) == EXIT_OK
    assert out.read_bytes() == first


def test_csv_digits(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["asympt", "--h", "0.001", "--out", str(out)]) == EXIT_OK
    _, rows = _read(out)
    val = rows[0]["two_term"]
    assert "," not in val and float(val) > 0
    assert float(format(float(val), ".17g")) == float(val)


def test_json_summary(tmp_path, capsys):
    out = tmp_path / "a.csv"
    assert main(["asympt", "--tau", "1.0", "--h", "1e-3", "--json", "--out", str(out)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["regime"] == "super-threshold"
    assert len(doc["argmin"]) == 4
    assert doc["config"]["h"] == [1e-3]


def test_constants_document(tmp_path):
    out = tmp_path / "c.json"
    assert main(["constants", "--grid-n", "800", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert abs(doc["theta0"] - 0.5901061249531) < 1e-5
    assert doc["config"]["grid_n"] == 800
    assert _no_nonfinite(out.read_text())


@pytest.mark.parametrize("argv", [
    [],
    ["bogus", "--out", "x"],
    ["asympt"],                                   # no --out
    ["asympt", "--h", "", "--out", "x"],          # empty list
    ["asympt", "--h", "-1", "--out", "x"],
    ["asympt", "--h", "nan", "--out", "x"],
    ["sigma", "--nu", "0", "--out", "x"],
    ["quasimode", "--theta", "0.1", "--out", "x"],
    ["model3d", "--R", "4", "--out", "x"],
    ["helical", "--samples", "zero", "--out", "x"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "a.csv"
    cfg.write_text(f"# comment\ntau = 0.1\nh = 1e-2, 1e-3\nout = {out}\n")
    assert main(["asympt", "--config", str(cfg)]) == EXIT_OK
    config, rows = _read(out)
    assert config["tau"] == 0.1 and len(rows) == 2
    assert main(["asympt", "--config", str(cfg), "--tau", "2.0"]) == EXIT_OK
    config, _ = _read(out)
    assert config["tau"] == 2.0


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert main(["asympt", "--config", str(bad), "--out", str(tmp_path / "a")]) == EXIT_USAGE
    bad.write_text("variant = cubed\n")
    assert main(["asympt", "--config", str(bad), "--out", str(tmp_path / "a")]) == EXIT_USAGE
    assert main(["asympt", "--config", str(tmp_path / "missing"), "--out", "x"]) == EXIT_USAGE
    bad.write_text("tau 1\n")
    with pytest.raises(Exception):
        read_config_file(str(bad))


def test_quasimode_failure_rows(tmp_path):
    out = tmp_path / "q.csv"
    argv = ["quasimode", "--theta", "0.2", "--kappa", "-1.2", "--gamma", "1.0",
            "--h", "1e-1,1e-6", "--out", str(out)]
    assert main(argv) == EXIT_FAIL
    _, rows = _read(out)
    by_h = {float(r["h"]): r for r in rows}
    assert by_h[0.1]["status"].startswith("failed")
    assert by_h[0.1]["ratio"] == ""
    assert by_h[1e-6]["status"] == "ok"
    assert _no_nonfinite(out.read_text().split("\n", 1)[1])


def test_model3d_small_box(tmp_path, capsys):
    out = tmp_path / "m.csv"
    argv = ["model3d", "--h", "0.1,0.05", "--eta", "0,0.5", "--zeta", "0", "--json", "--out", str(out)]
    assert main(argv + TINY_3D) == EXIT_OK
    _, rows = _read(out)
    assert len(rows) == 4
    ref = [r for r in rows if float(r["eta"]) == 0]
    assert all(float(r["deviation"]) == 0 for r in ref)
    doc = json.loads(capsys.readouterr().out)
    assert math.isfinite(doc["fit_a"]) and math.isfinite(doc["fit_b"])


def test_sigma_separated_value(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sigma", "--nu", "pi/2", "--out", str(out)]) == EXIT_OK
    _, rows = _read(out)
    assert rows[0]["method"] == "separated"
    assert abs(float(rows[0]["sigma"]) - 1.0) < 1e-3


def test_band_table(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["band", "--points", "5", "--grid-n", "800", "--out", str(out)]) == EXIT_OK
    _, rows = _read(out)
    assert [float(r["param"]) for r in rows] == pytest.approx([0.2, 0.55, 0.9, 1.25, 1.6])


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "magspec.cli", "asympt", "--h", "1e-3",
                          "--out", str(tmp_path / "a.csv")], capture_output=True, text=True)
    assert res.returncode == EXIT_OK, res.stderr
    res = subprocess.run([sys.executable, "-m", "magspec.cli", "asympt"], capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE
