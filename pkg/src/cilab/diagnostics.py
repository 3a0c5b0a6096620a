"""Measurement of everything the construction is supposed to satisfy:
equation residuals, per-stage estimate ledgers, transport-quantity tracking,
and report serialization.

Ledgers record measured value, bound and pass/fail; they never abort.  Sharp
(time-localized) rows are evaluated only at sampled times outside the stage's
bad intervals and are emitted as skipped rows otherwise, so every inequality
name appears exactly once per (stage, time) row set or in the explicit
not-checked list.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import (ScalarField, TensorField, VectorField, divergence, energy,
                   gradient, outer, spectral_derivative)
from .norms import derivative_sup, holder_seminorm
from .parameters import Membership, ParameterSchedule, bad_sets
from .snapshots import write_manifest, write_snapshot

SCHEMA_VERSION = 1
RESIDUAL_FLOOR = 1e-14
DT_DEFAULT = 1e-5

GLOBAL_LEDGER_NAMES = ("v_iter", "p_iter", "R_iter")
SHARP_LEDGER_NAMES = ("sharp_v", "sharp_p", "sharp_R")
NOT_CHECKED = ("loc_inv_lambda_mu",)


def sample_times(support, mu=None, n_equispaced: int = 33):
    """Equispaced times over the support plus slice times and overlap midpoints."""
    lo, hi = support
    times = set(np.linspace(lo, hi, n_equispaced).tolist())
    if mu:
        l_lo, l_hi = math.ceil(lo * mu), math.floor(hi * mu)
        for l in range(l_lo, l_hi + 1):
            times.add(l / mu)
            if l + 0.5 <= hi * mu:
                times.add((l + 0.5) / mu)
    return sorted(t for t in times if lo <= t <= hi)


def _advect_tensor(v: VectorField, t: TensorField) -> TensorField:
    out = np.zeros_like(t.data)
    for s in range(6):
        f = ScalarField(t.grid, t.data[s], check=False)
        for j in range(3):
            out[s] += v.data[j] * spectral_derivative(f, j).data
    return TensorField(t.grid, out, check=False)


def euler_reynolds_residual(triple, t: float, dt: float = DT_DEFAULT,
                            prefer_analytic: bool = True) -> dict:
    """Sup norm of d_t v + div(v (x) v) + grad p - div R, absolute and relative."""
    v = triple.v(t)
    p = triple.p(t)
    r = triple.Rstress(t)
    dtv = triple.v.dt(t) if prefer_analytic else None
    analytic = dtv is not None
    if dtv is None:
        dtv = triple.v.dt_fd(t, dt)
    resid = (dtv.data + divergence(outer(v, v)).data + gradient(p).data
             - divergence(r).data)
    rnorm = float(np.sqrt((resid ** 2).sum(axis=0)).max())
    scale = (derivative_sup(v, 0) + derivative_sup(v, 1)) * v.c0() \
        + derivative_sup(r, 0) + derivative_sup(r, 1) + RESIDUAL_FLOOR
    return {"t": t, "residual": rnorm, "relative": rnorm / scale,
        "scale": scale, "analytic_dt": analytic}


def divergence_norm(vfield: VectorField) -> float:
    return divergence(vfield).c0()


def _c1(x) -> float:
    return derivative_sup(x, 0) + derivative_sup(x, 1)


def _row(name, t, measured, bound):
    return {"name": name, "t": t, "measured": measured, "bound": bound,
            "passed": measured <= bound, "status": "checked"}


def _skipped(name, t, reason):
    return {"name": name, "t": t, "measured": math.nan, "bound": math.nan,
            "passed": None, "status": f"skipped:{reason}"}


def in_bad_set(sched: ParameterSchedule, q_new: int, t: float) -> bool:
    """Conservative membership of t in the stage's cutoff-overlap set."""
    bs = bad_sets(sched, q_new)[q_new - 1]
    return bs.membership(t) is not Membership.OUT


def verify_stage_estimates(prev, new, sched: ParameterSchedule, times,
                           dt: float = DT_DEFAULT) -> list:
    """Measured-vs-bound rows for the stage estimates at each sampled time.

    Sharp rows use the stronger (1/3-type) exponents and are evaluated only
    outside the new stage's bad intervals.
    """
    q_new = new.q
    eps0 = sched.eps0
    lam = sched.lam(q_new)
    log_lam_next = sched.log_lambda_extrapolated(q_new + 1)
    rows = []
    for t in times:
        w = VectorField(new.v.grid, new.v(t).data - prev.v(t).data, check=False)
        dp = ScalarField(new.p.grid, new.p(t).data - prev.p(t).data, check=False)
        wp = new.v(t + dt).data - prev.v(t + dt).data
        wm = new.v(t - dt).data - prev.v(t - dt).data
        dtw = float(np.sqrt((((wp - wm) / (2 * dt)) ** 2).sum(axis=0)).max())
        pp = new.p(t + dt).data - prev.p(t + dt).data
        pm = new.p(t - dt).data - prev.p(t - dt).data
        dtp = float(np.abs((pp - pm) / (2 * dt)).max())
        r = new.Rstress(t)

        v_lhs = w.c0() + dtw / lam + _c1(w) / lam
        p_lhs = dp.c0() + dtp / lam + (dp.c0() + derivative_sup(dp, 2)) / lam ** 2
        r_lhs = r.c0() + _c1(r) / lam
        rows.append(_row("v_iter", t, v_lhs, math.exp((-0.2 + eps0) * math.log(lam))))
        rows.append(_row("p_iter", t, p_lhs, math.exp((-0.4 + 2 * eps0) * math.log(lam))))
        rows.append(_row("R_iter", t, r_lhs, math.exp((-0.4 + 2 * eps0) * log_lam_next)))
        if in_bad_set(sched, q_new, t):
            for name in SHARP_LEDGER_NAMES:
                rows.append(_skipped(name, t, "in_bad_set"))
        else:
            rows.append(_row("sharp_v", t, v_lhs,
                             math.exp((-1.0 / 3.0 + eps0) * math.log(lam))))
            rows.append(_row("sharp_p", t, p_lhs,
                             math.exp((-2.0 / 3.0 + 2 * eps0) * math.log(lam))))
            rows.append(_row("sharp_R", t, r_lhs,
                             math.exp((-2.0 / 3.0 + 2 * eps0) * log_lam_next)))
    return rows


def nontrivial_margin(prev, new, n_probe: int = 9) -> dict:
    """Perturbation size on the inner plateau against half the seed amplitude."""
    probes = np.linspace(-0.125, 0.125, n_probe)
    w_max = 0.0
    for t in probes:
        w_max = max(w_max, float(np.sqrt(
            ((new.v(t).data - prev.v(t).data) ** 2).sum(axis=0)).max()))
    v0 = max(prev.v(t).c0() for t in probes)
    return {"name": "nontrivial_partial_sum", "measured": w_max,
            "bound": 0.5 * v0, "passed": w_max <= 0.5 * v0, "status": "checked"}


def track_lemma_quantities(ctx, sched: ParameterSchedule, q: int, times) -> list:
    """Empirical constants for the transport-estimate rows at the given times."""
    log_dq = sched.log_delta[q]
    log_dq1 = sched.log_delta[q + 1]
    lam_q = sched.lam(q)
    lam_next = sched.lam(q + 1)
    mu = sched.mu(q + 1)
    rows = []
    for t in times:
        wb = ctx.w_block(t, transport=True)
        if not wb["active"]:
            continue
        a_sup = max(e["a_sup"] for e in wb["lemma"])
        l_sup = max(e["L_sup"] for e in wb["lemma"])
        combo_al = math.exp(0.5 * log_dq1)
        rows.append({"name": "amplitude_bound", "t": t,
                     "measured": a_sup + l_sup, "combination": combo_al,
                     "empirical_constant": (a_sup + l_sup) / combo_al})
        dphi = ctx.checks["dphi_max"]
        combo_dphi = math.exp(0.5 * log_dq) * lam_q / mu
        rows.append({"name": "flow_deformation", "t": t, "measured": dphi,
                     "combination": combo_dphi,
                     "empirical_constant": dphi / combo_dphi})
        w_c = VectorField(ctx.grid, wb["w"].data - wb["w_o"].data, check=False)
        for order in (0, 1):
            measured = derivative_sup(w_c, 0) if order == 0 else _c1(w_c)
            combo = math.exp(0.5 * log_dq1) * (math.exp(0.5 * log_dq) * lam_q / mu) \
                * lam_next ** order
            rows.append({"name": f"corrector_c{order}", "t": t,
                         "measured": measured, "combination": combo,
                         "empirical_constant": measured / combo})
    return rows


def material_stress_derivative(triple, t: float, dt: float = DT_DEFAULT) -> float:
    r_dot = triple.Rstress.dt_fd(t, dt)
    adv = _advect_tensor(triple.v(t), triple.Rstress(t))
    return TensorField(triple.v.grid, r_dot.data + adv.data, check=False).c0()


def stage_norm_rows(prev, new, times, dt: float = DT_DEFAULT) -> list:
    """Raw per-time norms behind the estimate rows: perturbation, pressure
    increment (orders 0..2), stress, and the stress material derivative."""
    rows = []
    for t in times:
        w = VectorField(new.v.grid, new.v(t).data - prev.v(t).data, check=False)
        dp = ScalarField(new.p.grid, new.p(t).data - prev.p(t).data, check=False)
        wp = new.v(t + dt).data - prev.v(t + dt).data
        wm = new.v(t - dt).data - prev.v(t - dt).data
        r = new.Rstress(t)
        rows.append({
            "t": t,
            "w_c0": w.c0(),
            "w_c1": _c1(w),
            "dt_w_c0": float(np.sqrt((((wp - wm) / (2 * dt)) ** 2).sum(axis=0)).max()),
            "dp_c0": dp.c0(),
            "dp_c1": derivative_sup(dp, 1),
            "dp_c2": derivative_sup(dp, 2),
            "stress_c0": r.c0(),
            "stress_c1": _c1(r),
            "stress_material": material_stress_derivative(new, t, dt),
            "energy": energy(new.v(t)),
        })
    return rows


# ---------------------------------------------------------------------------
# stage reports


@dataclass
class StageReport:
    stage: int
    grid_n: int
    support: tuple
    schedule: dict
    time_rows: list = field(default_factory=list)     # per-time measurements
    ledger_rows: list = field(default_factory=list)   # inequality rows
    badset_intervals: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def add_time_row(self, **kw):
        self.time_rows.append(kw)


def build_time_row(triple, t: float, sched=None, q_new=None,
                   dt: float = DT_DEFAULT, prefer_analytic: bool = True) -> dict:
    res = euler_reynolds_residual(triple, t, dt, prefer_analytic)
    v = triple.v(t)
    p = triple.p(t)
    flagged = bool(sched is not None and q_new and in_bad_set(sched, q_new, t))
    return {
        "t": t,
        "residual": res["relative"],
        "energy": energy(v),
        "holder13_v": holder_seminorm(v, 1.0 / 3.0),
        "holder23_p": holder_seminorm(p, 2.0 / 3.0),
        "in_bad_set": int(flagged),
        "div_v": divergence_norm(v),
    }


_TS_COLUMNS = ("t", "residual", "energy", "holder13_v", "holder23_p", "in_bad_set")
_LEDGER_COLUMNS = ("name", "t", "measured", "bound", "passed", "status")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def emit_report(report: StageReport, outdir, snapshots=None):
    """Write manifest.json, ledger.csv and timeseries.csv (byte-stable)."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    ts = io.StringIO()
    w = csv.writer(ts, lineterminator="\n")
    w.writerow(_TS_COLUMNS)
    for row in report.time_rows:
        w.writerow([_fmt(row.get(c, "")) for c in _TS_COLUMNS])
    (out / "timeseries.csv").write_text(ts.getvalue())

    lg = io.StringIO()
    w = csv.writer(lg, lineterminator="\n")
    w.writerow(_LEDGER_COLUMNS)
    for row in report.ledger_rows:
        w.writerow([_fmt(row.get(c, "")) for c in _LEDGER_COLUMNS])
    (out / "ledger.csv").write_text(lg.getvalue())

    files = {"timeseries": "timeseries.csv", "ledger": "ledger.csv"}
    snap_names = []
    for label, fieldobj in (snapshots or {}).items():
        name = f"{label}.eulr"
        write_snapshot(out / name, fieldobj)
        snap_names.append(name)
    if snap_names:
        files["snapshots"] = snap_names
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "stage": report.stage,
        "grid_n": report.grid_n,
        "support": list(report.support),
        "schedule": report.schedule,
        "sampled_times": [row["t"] for row in report.time_rows],
        "badset_intervals": report.badset_intervals,
        "not_checked": list(NOT_CHECKED),
        "files": files,
        "code_version": "0.1.0",
    }
    manifest.update(report.extras)
    write_manifest(out / "manifest.json", manifest)
    return out


def load_report(indir) -> dict:
    """Parse a report directory back into dictionaries (schema-checked)."""
    from .snapshots import read_manifest
    out = Path(indir)
    manifest = read_manifest(out / "manifest.json")
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {manifest.get('schema_version')}")
    def parse(name):
        with open(out / name, newline="") as fh:
            return list(csv.DictReader(fh))
    return {"manifest": manifest,
            "timeseries": parse(manifest["files"]["timeseries"]),
            "ledger": parse(manifest["files"]["ledger"])}
