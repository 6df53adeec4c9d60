import json

import pytest

from srforms import cli


def test_geodesic_outputs(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    rep = tmp_path / "closure.json"
    rc = cli.main(["geodesic", "--model", "sphere3", "--lambda", "0",
                   "--length", "6.3", "--out", str(out), "--report", str(rep)])
    assert rc == 0
    data = json.loads(rep.read_text())
    assert data["closure"] == "circle"
    assert abs(data["length"] - 6.28318530718) < 1e-9
    assert data["version"]
    assert data["config"]["model"] == "sphere3"
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[2] == "s,p0,p1,p2,p3,v0,v1,v2,v3"


def test_geodesic_deterministic(tmp_path):
    args = ["geodesic", "--model", "heisenberg", "--lambda", "1.0",
            "--length", "2.0", "--out", str(tmp_path / "t.csv")]
    assert cli.main(args) == 0
    first = (tmp_path / "t.csv").read_bytes()
    assert cli.main(args) == 0
    assert (tmp_path / "t.csv").read_bytes() == first


def test_surface_outputs(tmp_path):
    rc = cli.main(["surface", "--model", "sphere3", "--lambda", "0",
                   "--resolution", "48x24",
                   "--out-json", str(tmp_path / "a.json"),
                   "--out-obj", str(tmp_path / "a.obj")])
    assert rc == 0
    data = json.loads((tmp_path / "a.json").read_text())
    assert data["closed"] is True
    assert data["euler_characteristic"] == 0
    assert abs(data["total_area"] - 12.5663706144) < 1e-6
    obj = (tmp_path / "a.obj").read_text().splitlines()
    assert any(ln.startswith("v ") for ln in obj)
    assert any(ln.startswith("f ") for ln in obj)


def test_isoperimetric_row_count(tmp_path):
    out = tmp_path / "iso.csv"
    rc = cli.main(["isoperimetric", "--grid", "0.5:0.7:0.1",
                   "--samples", "20000", "--directions", "64",
                   "--s-steps", "32", "--out", str(out)])
    assert rc == 0
    rows = [ln for ln in out.read_text().splitlines()
            if ln and not ln.startswith("#")]
    assert rows[0].startswith("lambda,")
    assert len(rows) == 1 + 3  # header + inclusive grid


def test_validation_exit_codes(tmp_path):
    # bad numeric range -> 2
    assert cli.main(["geodesic", "--model", "sphere3", "--lambda", "0",
                     "--length", "-1"]) == 2
    assert cli.main(["isoperimetric", "--grid", "1.0:0.5:0.1"]) == 2
    # unknown flags/subcommands -> argparse exits 2
    with pytest.raises(SystemExit) as ex:
        cli.main(["geodesic", "--model", "klein", "--lambda", "0"])
    assert ex.value.code == 2
    with pytest.raises(SystemExit) as ex:
        cli.main(["frobnicate"])
    assert ex.value.code == 2


def test_verify_runs(capsys):
    rc = cli.main(["verify"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS" in out and "FAIL " not in out
