import json
from pathlib import Path

import numpy as np
import pytest

from cilab.beltrami import build_families, export_family_json
from cilab.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_verify_geometry_ok(capsys):
    assert run_cli("verify-geometry") == 0
    out = capsys.readouterr().out
    assert "certified radius" in out


def test_verify_geometry_json_golden(capsys):
    assert run_cli("verify-geometry", "--json") == 0
    payload = json.loads(capsys.readouterr().out)
    golden = json.loads(Path(__file__).with_name("data").joinpath(
        "verify_geometry.json").read_text())
    assert payload == golden


def test_verify_geometry_family_fault_injection(tmp_path, capsys):
    fe, _ = build_families()
    good = tmp_path / "family.json"
    good.write_text(export_family_json(fe))
    assert run_cli("verify-geometry", "--family", str(good)) == 0
    capsys.readouterr()
    payload = json.loads(good.read_text())
    payload["members"][0] = [2, 2, 2]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(payload))
    assert run_cli("verify-geometry", "--family", str(bad)) == 2


def test_verify_operators(tmp_path, capsys):
    assert run_cli("verify-operators", "--fields", "3", "--out", str(tmp_path)) == 0
    csv_text = (tmp_path / "schauder_probe.csv").read_text()
    assert csv_text.splitlines()[0] == "lambda,norm_alpha,ratio"
    assert (tmp_path / "commutator_probe.csv").exists()


def test_params_validation_and_output(tmp_path, capsys):
    assert run_cli("params", "--eps0", "0.5", "--lambda0", "4") == 64
    capsys.readouterr()
    assert run_cli("params", "--eps0", "0.05") == 64
    capsys.readouterr()
    rc = run_cli("params", "--eps0", "0.05", "--lambda0", "4", "--stages", "3",
                 "--out", str(tmp_path), "--json")
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["d_min"] - 0.9998326439859422) < 1e-12
    assert not payload["all_pass"]        # desk seed fails summabilities
    assert (tmp_path / "schedule.csv").exists()
    assert (tmp_path / "params.json").exists()


def test_params_search_reproducible(capsys):
    assert run_cli("params", "--eps0", "0.05", "--search", "--json") == 0
    first = json.loads(capsys.readouterr().out)
    assert run_cli("params", "--eps0", "0.05", "--search", "--json") == 0
    second = json.loads(capsys.readouterr().out)
    assert first == second
    assert first["all_pass"]


def test_run_grid_capacity_rejected(tmp_path, capsys):
    rc = run_cli("run", "--grid", "16", "--lambda0", "4", "--stages", "1",
                 "--out", str(tmp_path / "r"))
    assert rc == 4


def test_run_usage_errors(tmp_path):
    assert run_cli("run", "--grid", "20", "--out", str(tmp_path / "r")) == 64
    assert run_cli("run", "--eps0", "0.3", "--out", str(tmp_path / "r")) == 64


def test_run_q0_and_report(tmp_path, capsys):
    out = tmp_path / "q0"
    rc = run_cli("run", "--grid", "32", "--stages", "0", "--samples", "7",
                 "--out", str(out), "--snapshots")
    assert rc == 0
    capsys.readouterr()
    stage0 = out / "stage0"
    rows = (stage0 / "timeseries.csv").read_text().splitlines()
    assert len(rows) == 8
    residuals = [float(r.split(",")[1]) for r in rows[1:]]
    assert max(residuals) <= 1e-8
    snaps = sorted(stage0.glob("v_*.eulr"))
    assert len(snaps) == 7
    assert run_cli("report", "--in", str(stage0)) == 0
    assert "stage 0" in capsys.readouterr().out


def test_report_rejects_bad_directory(tmp_path, capsys):
    assert run_cli("report", "--in", str(tmp_path)) == 2


def test_thread_cap_env(tmp_path, monkeypatch, capsys):
    from cilab.cli import worker_count
    monkeypatch.delenv("CILAB_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("CILAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CILAB_THREADS", "junk")
    assert worker_count() == 1
    # threaded stage-0 rows reproduce the serial bytes
    monkeypatch.setenv("CILAB_THREADS", "2")
    assert run_cli("run", "--grid", "32", "--stages", "0", "--samples", "5",
                   "--out", str(tmp_path / "par")) == 0
    monkeypatch.setenv("CILAB_THREADS", "1")
    assert run_cli("run", "--grid", "32", "--stages", "0", "--samples", "5",
                   "--out", str(tmp_path / "ser")) == 0
    capsys.readouterr()
    for name in ("timeseries.csv", "ledger.csv", "manifest.json"):
        a = (tmp_path / "par" / "stage0" / name).read_bytes()
        b = (tmp_path / "ser" / "stage0" / name).read_bytes()
        assert a == b
