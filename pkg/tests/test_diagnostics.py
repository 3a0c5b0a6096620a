import numpy as np
import pytest

from cilab.beltrami import beltrami_field, stress_amplitudes
from cilab.diagnostics import (NOT_CHECKED, SCHEMA_VERSION, StageReport,
                               build_time_row, emit_report,
                               euler_reynolds_residual, load_report,
                               material_stress_derivative, nontrivial_margin,
                               sample_times, track_lemma_quantities,
                               verify_stage_estimates)
from cilab.grid import ScalarField, TensorField, VectorField, energy
from cilab.iteration import EulerReynoldsTriple, initial_triple
from cilab.timefield import separable
from cilab.snapshots import read_snapshot, write_snapshot


def test_sample_times_structure():
    times = sample_times((-1.0 / 3.0, 1.0 / 3.0), mu=12.0, n_equispaced=9)
    assert times[0] == -1.0 / 3.0 and times[-1] == 1.0 / 3.0
    assert 2.0 / 12.0 in times               # slice time
    assert 2.5 / 12.0 in times               # overlap midpoint
    assert times == sorted(times)


def test_initial_triple_residual_rows(grid32):
    triple = initial_triple(4, 0.05, grid32)
    for t in np.linspace(-0.23, 0.23, 9):
        row = euler_reynolds_residual(triple, float(t))
        assert row["analytic_dt"]
        assert row["relative"] <= 1e-8


def test_exact_beltrami_solution_residual(grid64, families):
    # steady Beltrami flow with p = -|W|^2/2 solves the equations exactly
    fe, _ = families
    gam = stress_amplitudes(np.eye(3), fe)
    w = beltrami_field(dict(gam), fe, 2, grid64)
    p_data = -0.5 * (w.data ** 2).sum(axis=0)
    p_data -= p_data.mean()
    support = (-1.0, 1.0)
    v = separable(grid64, "vector", [(lambda t: 1.0, w)], support,
                  dterms=[(lambda t: 0.0, VectorField.zero(grid64))])
    p = separable(grid64, "scalar",
                  [(lambda t: 1.0, ScalarField(grid64, p_data))], support)
    r = separable(grid64, "tensor", [(lambda t: 0.0, TensorField.zero(grid64))],
                  support)
    triple = EulerReynoldsTriple(0, v, p, r, support)
    row = euler_reynolds_residual(triple, 0.1)
    assert row["relative"] <= 1e-9


def test_energy_constant_on_plateau(grid32):
    triple = initial_triple(4, 0.05, grid32)
    values = [energy(triple.v(t)) for t in np.linspace(-0.125, 0.125, 7)]
    spread = max(values) - min(values)
    assert spread <= 1e-12 * max(values)


def test_stage_estimate_rows(small_step, desk_schedule):
    prev, new = small_step
    rows = verify_stage_estimates(prev, new, desk_schedule, [1.0 / 6.0 + 0.02, 0.0])
    names = [r["name"] for r in rows]
    for expected in ("v_iter", "p_iter", "R_iter", "sharp_v", "sharp_p", "sharp_R"):
        assert names.count(expected) == 2
    checked = [r for r in rows if r["status"] == "checked"]
    assert all(np.isfinite(r["measured"]) and np.isfinite(r["bound"])
               for r in checked)
    # desk scale: every sampled time sits inside the overlap set, so the
    # sharp rows are skipped with the reason recorded
    sharp = [r for r in rows if r["name"].startswith("sharp_")]
    assert all(r["status"] == "skipped:in_bad_set" for r in sharp)
    # the smallness margin is honest data: at this seed the overlap midpoint
    # lands exactly on the plateau edge, so the perturbation reaches t = 1/8
    margin = nontrivial_margin(prev, new)
    assert np.isfinite(margin["measured"]) and margin["bound"] > 0
    assert margin["measured"] >= 0.0


def test_ledger_completeness(small_step, desk_schedule):
    prev, new = small_step
    rows = verify_stage_estimates(prev, new, desk_schedule, [0.1])
    names = {r["name"] for r in rows}
    assert names == {"v_iter", "p_iter", "R_iter", "sharp_v", "sharp_p", "sharp_R"}
    assert "loc_inv_lambda_mu" in NOT_CHECKED


def test_lemma_rows(small_step, desk_schedule):
    _, new = small_step
    ctx = new.meta["context"]
    rows = track_lemma_quantities(ctx, desk_schedule, 0, [1.0 / 6.0 + 0.02])
    names = {r["name"] for r in rows}
    assert {"amplitude_bound", "flow_deformation", "corrector_c0",
            "corrector_c1"} <= names
    for r in rows:
        assert np.isfinite(r["empirical_constant"])
        assert r["combination"] > 0


def test_material_stress_derivative(grid32):
    triple = initial_triple(4, 0.05, grid32)
    assert material_stress_derivative(triple, 0.0) < 1e-8   # plateau: static
    assert material_stress_derivative(triple, 0.2) > 0.0


def test_snapshot_roundtrip(grid32):
    r = np.random.default_rng(0)
    for make in (lambda: ScalarField(grid32, r.standard_normal((32,) * 3)),
                 lambda: VectorField(grid32, r.standard_normal((3,) + (32,) * 3)),
                 lambda: TensorField(grid32, r.standard_normal((6,) + (32,) * 3))):
        f = make()
        import tempfile, os
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "f.eulr")
            write_snapshot(path, f)
            back = read_snapshot(path)
            assert type(back) is type(f)
            assert np.array_equal(back.data, f.data)
            raw = open(path, "rb").read()
            assert raw[:4] == b"EULR"
            # x1-fastest ordering of the payload
            n = 32
            first_two = np.frombuffer(raw[16:32], dtype="<f8")
            comp0 = f.data if f.data.ndim == 3 else f.data[0]
            assert first_two[1] == comp0[1, 0, 0]


def test_snapshot_rejects_corruption(grid32, tmp_path):
    f = ScalarField(grid32, np.zeros((32,) * 3))
    path = tmp_path / "f.eulr"
    write_snapshot(path, f)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    bad = tmp_path / "bad.eulr"
    bad.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        read_snapshot(bad)
    trunc = tmp_path / "trunc.eulr"
    trunc.write_bytes(path.read_bytes()[:100])
    with pytest.raises(ValueError):
        read_snapshot(trunc)


def test_report_roundtrip_and_schema(tmp_path, grid32):
    report = StageReport(0, 32, (-0.25, 0.25), {"eps0": 0.05, "lambda0": 4})
    report.add_time_row(t=0.0, residual=1e-9, energy=0.5, holder13_v=0.1,
                        holder23_p=0.2, in_bad_set=0, div_v=0.0)
    report.ledger_rows.append({"name": "v_iter", "t": 0.0, "measured": 0.1,
                               "bound": 0.2, "passed": True, "status": "checked"})
    out = emit_report(report, tmp_path / "rep")
    data = load_report(out)
    assert data["manifest"]["schema_version"] == SCHEMA_VERSION
    assert data["manifest"]["not_checked"] == list(NOT_CHECKED)
    assert len(data["timeseries"]) == 1
    assert float(data["timeseries"][0]["energy"]) == 0.5
    assert data["ledger"][0]["name"] == "v_iter"
    # byte stability under re-emission
    first = (out / "timeseries.csv").read_bytes()
    emit_report(report, tmp_path / "rep")
    assert (out / "timeseries.csv").read_bytes() == first


def test_empty_report_is_valid(tmp_path):
    report = StageReport(0, 32, (-0.25, 0.25), {})
    out = emit_report(report, tmp_path / "empty")
    data = load_report(out)
    assert data["timeseries"] == []
    assert data["ledger"] == []


def test_report_rejects_wrong_schema(tmp_path):
    report = StageReport(0, 32, (-0.25, 0.25), {})
    out = emit_report(report, tmp_path / "rep")
    mani = (out / "manifest.json").read_text().replace(
        '"schema_version": 1', '"schema_version": 99')
    (out / "manifest.json").write_text(mani)
    with pytest.raises(ValueError):
        load_report(out)


def test_build_time_row_fields(grid32):
    triple = initial_triple(4, 0.05, grid32)
    row = build_time_row(triple, 0.0)
    for key in ("t", "residual", "energy", "holder13_v", "holder23_p",
                "in_bad_set", "div_v"):
        assert key in row
