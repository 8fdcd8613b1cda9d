import json

import pytest

from multiphoton.cli import clicks_main, scan_main
from multiphoton.trajectories import ClickRecord


def test_scan_preset_to_file(tmp_path):
    out = tmp_path / "fig2.csv"
    assert scan_main(["--preset", "fig2", "--grid=-1:1:5", "--out", str(out), "--no-timestamp"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# multiphoton")
    assert not any(l.startswith("# timestamp") for l in lines)
    assert len([l for l in lines if not l.startswith("#")]) == 6


def test_scan_stdout_timestamp(capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert scan_main(["--preset", "fig1c", "--grid", "0:1:3"]) == 0
    assert "# timestamp=1970-01-01T00:00:00Z" in capsys.readouterr().out


def test_scan_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "fig2", "grid": "0:0.5:3", "measure_orders": {"2": 4},
                               "outputs": ["m1", "M2", "status"]}))
    out = tmp_path / "o.csv"
    assert scan_main(["--config", str(cfg), "--out", str(out)]) == 0
    header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
    assert header == "delta_over_g,m1,M2,status"


def test_scan_failed_rows_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"two_kappa_over_g": 0.1, "gamma_over_g": 0.1, "drive_over_kappa": 60,
                               "grid": "0:0.1:2", "n_photon_max": 6, "k_max": 2}))
    assert scan_main(["--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == 2


def test_scan_requires_source():
    with pytest.raises(SystemExit):
        scan_main([])


def test_clicks(tmp_path):
    out = tmp_path / "clicks.txt"
    args = ["--preset", "fig3", "--delta", "0.7", "--n-traj", "3", "--duration", "300",
            "--seed", "8", "--out", str(out)]
    assert clicks_main(args) == 0
    rec = ClickRecord.read(out)
    assert rec.seed == 8 and rec.n_trajectories == 3 and rec.times.size > 0
    first = out.read_text()
    assert clicks_main(args) == 0
    assert out.read_text() == first
    assert clicks_main(args[:-2] + ["--efficiency", "0.5", "--out", str(tmp_path / "t.txt")]) == 0
