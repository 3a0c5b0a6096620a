"""Acceptance gate: every primary criterion at its stated tolerance.

Each test prints one PASS line on success (run with -s or -rA to see them);
an assertion failure marks the criterion failed.  The heavy criteria (the
128-grid inductive step and the 256-grid cancellation check) dominate the
wall time and stay well inside their stated budgets.
"""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from cilab.beltrami import (beltrami_average, beltrami_field, operator_norm,
                            reconstruct, stress_amplitudes)
from cilab.cli import main as cli_main
from cilab.grid import (GridSpec, ScalarField, VectorField, divergence, dot,
                        gradient, low_pass, outer)
from cilab.inverse_div import (OscillatoryProbe, commutator_scaling_probe,
                               inverse_divergence, schauder_scaling_probe)
from cilab.iteration import (cancellation_residual, frozen_context,
                             initial_triple, iterate)
from cilab.norms import c1_norm
from cilab.parameters import (check_global_inequalities, dimension_threshold,
                              hausdorff_cover, localized_delta, make_schedule,
                              seed_search)


def report(name, elapsed, **measurements):
    details = " ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in measurements.items())
    print(f"[PASS] {name} ({elapsed:.1f}s) {details}")


@pytest.fixture
def full_step(families):
    """The stated desk-scale step: lambda0 = 4, eps0 = 0.05, n = 128, Q = 1."""
    grid = GridSpec(128)
    sched = make_schedule(0.05, lambda0=4, stages=2)
    prev = initial_triple(4, 0.05, grid)
    t0 = time.perf_counter()
    new = iterate(prev, sched, families, grid, substeps=16)
    return {"grid": grid, "sched": sched, "prev": prev, "new": new,
            "built": time.perf_counter() - t0}


def test_beltrami_identities(families, grid64):
    t0 = time.perf_counter()
    fe, fo = families
    rng = np.random.default_rng(42)
    worst = {"div": 0.0, "stat": 0.0, "avg": 0.0}
    for fam in (fe, fo):
        amps = {}
        for k in fam.pairs:
            a = rng.standard_normal() + 1j * rng.standard_normal()
            amps[k] = a
            amps[tuple(-np.asarray(k))] = np.conj(a)
        w = beltrami_field(amps, fam, 3, grid64)
        worst["div"] = max(worst["div"], divergence(w).c0() / c1_norm(w))
        lhs = divergence(outer(w, w))
        rhs = gradient(ScalarField(grid64, 0.5 * (w.data ** 2).sum(axis=0),
                                   check=False))
        worst["stat"] = max(worst["stat"], (lhs - rhs).c0() / w.c0() ** 2)
        gap = np.abs(outer(w, w).mean() - beltrami_average(amps, fam)).max()
        worst["avg"] = max(worst["avg"], float(gap))
    assert worst["div"] <= 1e-10
    assert worst["stat"] <= 1e-10
    assert worst["avg"] <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report("beltrami identities", elapsed, **worst)


def test_geometric_lemma(families):
    t0 = time.perf_counter()
    fe, fo = families
    rng = np.random.default_rng(7)
    worst_rec, worst_id = 0.0, 0.0
    for fam in (fe, fo):
        assert fam.safe_radius > 1e-3
        gam = stress_amplitudes(np.eye(3), fam)
        worst_id = max(worst_id, max(abs(v - 0.5) for v in gam.values()))
        for _ in range(100):
            e = rng.standard_normal((3, 3))
            e = 0.5 * (e + e.T)
            e *= (fam.safe_radius / 2) * rng.uniform(0, 1) / operator_norm(e)
            mat = np.eye(3) + e
            gap = np.abs(reconstruct(stress_amplitudes(mat, fam), fam) - mat).max()
            worst_rec = max(worst_rec, float(gap))
    assert worst_id <= 1e-12
    assert worst_rec <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report("geometric decomposition", elapsed, reconstruction=worst_rec,
           r0_even=fe.safe_radius, r0_odd=fo.safe_radius)


def test_inverse_divergence(grid64):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_id, worst_tr = 0.0, 0.0
    for _ in range(50):
        data = rng.standard_normal((3, 64, 64, 64))
        v = low_pass(VectorField(grid64, data), 9)
        v = VectorField(grid64, v.data / v.c0())
        r = inverse_divergence(v)
        gap = divergence(r).data - (v.data - v.mean().reshape(3, 1, 1, 1))
        worst_id = max(worst_id, float(np.abs(gap).max()) / v.c0())
        worst_tr = max(worst_tr, float(np.abs(r.trace().data).max()))
    assert worst_id <= 1e-11
    assert worst_tr <= 1e-12

    x1, _, _ = grid64.meshgrid()
    amp = VectorField(grid64, np.stack([np.ones_like(x1), 0 * x1, 0 * x1]))
    probe = OscillatoryProbe(amp, (1, 0, 0), 4, 0.1)
    srows = schauder_scaling_probe(probe)
    sbound = 2.0 ** (-0.9) * 1.25
    sratio = max(r["ratio"] for r in srows[1:])
    assert sratio <= sbound
    b = ScalarField(grid64, np.sin(x1))
    crows = commutator_scaling_probe(b, probe)
    cbound = 2.0 ** (0.1 - 2.0) * 1.5
    cratio = max(r["ratio"] for r in crows[1:])
    assert cratio <= cbound
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report("inverse divergence", elapsed, identity=worst_id, trace=worst_tr,
           schauder_ratio=sratio, commutator_ratio=cratio)


def test_initial_triple_criterion(grid64):
    t0 = time.perf_counter()
    from cilab.diagnostics import euler_reynolds_residual
    from cilab.grid import energy
    triple = initial_triple(4, 0.05, grid64)
    worst = 0.0
    for t in np.linspace(-0.24, 0.24, 9):
        row = euler_reynolds_residual(triple, float(t))
        assert row["analytic_dt"]
        worst = max(worst, row["relative"])
    assert worst <= 1e-8
    assert triple.Rstress(0.0).c0() == 0.0
    energies = [energy(triple.v(t)) for t in np.linspace(-0.125, 0.125, 9)]
    spread = max(energies) - min(energies)
    assert spread <= 1e-12 * max(energies)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report("initial stage", elapsed, residual=worst, energy_spread=spread)


def test_full_inductive_step(full_step):
    t0 = time.perf_counter()
    from cilab.diagnostics import euler_reynolds_residual
    prev, new, sched = full_step["prev"], full_step["new"], full_step["sched"]
    ctx = new.meta["context"]
    mu = sched.mu(1)

    # temporal support: old support padded by 1/mu, inside [-1/2, 1/2]
    assert new.support[0] >= prev.support[0] - 1.0 / mu - 1e-12
    assert new.support[1] <= prev.support[1] + 1.0 / mu + 1e-12
    assert -0.5 < new.support[0] and new.support[1] < 0.5

    # squared cutoffs sum to one
    rng = np.random.default_rng(0)
    ts = rng.uniform(new.support[0], new.support[1], 1000)
    chi_gap = float(np.abs(ctx.cutoffs.sum_of_squares(ts) - 1.0).max())
    assert chi_gap <= 1e-12

    times = [0.115, 1.0 / 6.0, 0.18, 0.21, -0.19]
    worst = {"div": 0.0, "resid": 0.0, "trace": 0.0, "omega": 0.0}
    for t in times:
        v1 = new.v(t)
        worst["div"] = max(worst["div"], divergence(v1).c0() / c1_norm(v1))
        row = euler_reynolds_residual(new, t, dt=1e-5, prefer_analytic=False)
        worst["resid"] = max(worst["resid"], row["relative"])
    for t in (0.18, -0.19):
        _, info = ctx.reynolds(t)
        worst["trace"] = max(worst["trace"], info["trace_residue"])
        worst["omega"] = max(worst["omega"], ctx.dt_w_agreement(t))
    assert worst["div"] <= 1e-10
    assert worst["resid"] <= 1e-4
    assert worst["trace"] <= 1e-10
    assert worst["omega"] <= 1e-6
    elapsed = time.perf_counter() - t0 + full_step["built"]
    assert elapsed < 1800.0
    report("full inductive step", elapsed, chi_gap=chi_gap, **worst)


def test_frozen_cancellation(families):
    import gc
    gc.collect()
    t0 = time.perf_counter()
    grid = GridSpec(256)
    mat = np.diag([0.02, -0.01, -0.01])
    ctx = frozen_context(mat, 32, grid, families)
    out = cancellation_residual(ctx, 0.0)
    assert out["relative"] <= 0.10
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    report("frozen cancellation", elapsed, relative=out["relative"],
           stress_norm=out["stress_norm"])


def test_parameter_calculus():
    t0 = time.perf_counter()
    d_min = dimension_threshold(0.05)
    alpha, eps1 = 1.05, 0.05 ** 2 / 18.0
    top = (1 + alpha) * 0.85
    closed_form = top / (top + 2 * alpha * eps1)
    assert abs(d_min - closed_form) <= 1e-6

    s_log = make_schedule(0.05, log_lambda0=1e6, stages=8)
    d = 0.5 * (1.0 + d_min)
    covers = [hausdorff_cover(s_log, q, d) for q in range(1, 9)]
    totals = [c.log_total for c in covers]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    tail_ratio = math.exp(covers[7].log_tail_bound - covers[0].log_total)
    assert tail_ratio <= 1e-3

    found = seed_search(0.05, stages=8)
    sched = make_schedule(0.05, log_lambda0=found["log_lambda0"], stages=8)
    rows = check_global_inequalities(sched)
    assert all(r["passed"] for r in rows)
    assert all(np.isfinite(r["slack"]) for r in rows)

    rng = np.random.default_rng(11)
    offsets = {localized_delta(s_log, float(t0_)).floor_entry_offset
               for t0_ in rng.uniform(-0.9, 0.9, 100)}
    assert len(offsets) == 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    report("parameter calculus", elapsed, d_min=d_min, tail_ratio=tail_ratio,
           seed_log=found["log_lambda0"], floor_offset=next(iter(offsets)))


def test_determinism(tmp_path):
    t0 = time.perf_counter()
    args = ["run", "--grid", "32", "--stages", "1", "--samples", "5",
            "--substeps", "16"]
    assert cli_main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "b")]) == 0
    mismatches = []
    for sub in ("stage0", "stage1"):
        for f in sorted((tmp_path / "a" / sub).iterdir()):
            twin = tmp_path / "b" / sub / f.name
            if not filecmp.cmp(f, twin, shallow=False):
                mismatches.append(f.name)
    assert mismatches == []
    elapsed = time.perf_counter() - t0
    report("determinism", elapsed, files_compared=6)
