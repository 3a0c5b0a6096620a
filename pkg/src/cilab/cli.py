"""Operator entry point.

Subcommands mirror the module boundaries so a failure isolates one subsystem:

  verify-geometry   frequency families, amplitude solve, certified radius
  verify-operators  inverse divergence identities and scaling probes
  run               seed stage plus inductive steps, with stage reports
  params            schedule, inequality ledgers, cover sums, seed search
  report            summarise and validate an emitted report directory

Exit codes are a stable contract: 0 ok, 2 geometry/invariant failure,
3 amplitude-ball violation, 4 grid capacity, 5 no passing seed, 64 usage.
CILAB_THREADS caps internal parallelism (default 1).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_BALL = 3
EXIT_CAPACITY = 4
EXIT_NO_SEED = 5
EXIT_USAGE = 64

PROBE_SEED = 20240131


def worker_count() -> int:
    raw = os.environ.get("CILAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------


def cmd_verify_geometry(args) -> int:
    from . import beltrami
    from .grid import GridSpec, divergence, gradient, outer, ScalarField

    results = {"checks": [], "ok": True}

    def check(name, ok, detail=""):
        results["checks"].append({"name": name, "ok": bool(ok), "detail": detail})
        if not ok:
            results["ok"] = False

    try:
        if args.family:
            fam = beltrami.verify_family_json(Path(args.family).read_text())
            check("family_json", True, f"parity={fam.parity} r0={fam.safe_radius:.6g}")
            fams = beltrami.build_families()
        else:
            fams = beltrami.build_families()
    except Exception as exc:  # noqa: BLE001 - report and map to the exit contract
        check("family_construction", False, str(exc))
        _emit(results, args)
        return EXIT_INVARIANT

    fe, fo = fams
    for fam in (fe, fo):
        check(f"radius_{fam.parity}", fam.safe_radius > 1e-3,
              f"r0 = {fam.safe_radius:.9g}")
        gam = beltrami.stress_amplitudes(np.eye(3), fam)
        check(f"gamma_identity_{fam.parity}",
              max(abs(v - 0.5) for v in gam.values()) < 1e-12)
        rng = np.random.default_rng(PROBE_SEED)
        worst = 0.0
        for _ in range(100):
            e = rng.standard_normal((3, 3))
            e = 0.5 * (e + e.T)
            e *= (fam.safe_radius / 2) * rng.uniform(0, 1) / beltrami.operator_norm(e)
            r = np.eye(3) + e
            worst = max(worst, float(np.abs(
                beltrami.reconstruct(beltrami.stress_amplitudes(r, fam), fam) - r).max()))
        check(f"reconstruction_{fam.parity}", worst < 1e-12, f"max err {worst:.3g}")

    grid = GridSpec(32)
    rng = np.random.default_rng(PROBE_SEED)
    amps = {}
    for k in fe.pairs:
        a = rng.standard_normal() + 1j * rng.standard_normal()
        amps[k] = a
        amps[tuple(-np.asarray(k))] = np.conj(a)
    w = beltrami.beltrami_field(amps, fe, 2, grid)
    check("divergence_free", divergence(w).c0() <= 1e-10 * max(w.c0(), 1.0))
    lhs = divergence(outer(w, w))
    rhs = gradient(ScalarField(grid, 0.5 * (w.data ** 2).sum(axis=0), check=False))
    check("stationarity", (lhs - rhs).c0() <= 1e-10 * w.c0() ** 2)
    avg_err = float(np.abs(outer(w, w).mean() - beltrami.beltrami_average(amps, fe)).max())
    check("average_formula", avg_err <= 1e-10)

    results["safe_radius"] = {"even": fe.safe_radius, "odd": fo.safe_radius}
    _emit(results, args)
    if not args.json:
        print(f"certified radius: even {fe.safe_radius:.9g}, odd {fo.safe_radius:.9g}")
    return EXIT_OK if results["ok"] else EXIT_INVARIANT


def cmd_verify_operators(args) -> int:
    from .grid import GridSpec, VectorField, ScalarField, divergence, low_pass
    from .inverse_div import (OscillatoryProbe, commutator_scaling_probe,
                              inverse_divergence, probe_table_csv,
                              schauder_scaling_probe)

    results = {"checks": [], "ok": True}

    def check(name, ok, detail=""):
        results["checks"].append({"name": name, "ok": bool(ok), "detail": detail})
        if not ok:
            results["ok"] = False

    grid = GridSpec(64)
    rng = np.random.default_rng(PROBE_SEED)

    def one_field(_):
        data = rng.standard_normal((3, grid.n, grid.n, grid.n))
        v = low_pass(VectorField(grid, data), 9)
        return VectorField(grid, v.data / np.abs(v.data).max())

    worst_div, worst_trace = 0.0, 0.0
    for i in range(args.fields):
        v = one_field(i)
        r = inverse_divergence(v)
        mean = v.mean().reshape(3, 1, 1, 1)
        gap = divergence(r).data - (v.data - mean)
        worst_div = max(worst_div, float(np.abs(gap).max()) / v.c0())
        worst_trace = max(worst_trace, float(np.abs(r.trace().data).max()))
    check("div_inverse_identity", worst_div <= 1e-11, f"{worst_div:.3g}")
    check("trace_free", worst_trace <= 1e-12, f"{worst_trace:.3g}")

    x1, _, _ = grid.meshgrid()
    amp = VectorField(grid, np.stack([np.ones_like(x1), 0 * x1, 0 * x1]))
    probe = OscillatoryProbe(amp, (1, 0, 0), 4, 0.1)
    srows = schauder_scaling_probe(probe)
    sbound = 2.0 ** (-(1 - probe.alpha)) * 1.25
    check("schauder_scaling",
          all(r["ratio"] <= sbound for r in srows if not math.isnan(r["ratio"])),
          f"bound {sbound:.4g}")
    b = ScalarField(grid, np.sin(x1))
    crows = commutator_scaling_probe(b, probe)
    cbound = 2.0 ** (probe.alpha - 2) * 1.5
    check("commutator_scaling",
          all(r["ratio"] <= cbound for r in crows if not math.isnan(r["ratio"])),
          f"bound {cbound:.4g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "schauder_probe.csv").write_text(probe_table_csv(srows))
        (out / "commutator_probe.csv").write_text(probe_table_csv(crows))
    _emit(results, args)
    return EXIT_OK if results["ok"] else EXIT_INVARIANT


def cmd_run(args) -> int:
    from .beltrami import build_families
    from .diagnostics import (StageReport, build_time_row, emit_report,
                              nontrivial_margin, sample_times, stage_norm_rows,
                              track_lemma_quantities, verify_stage_estimates)
    from .grid import CapacityError, GridSpec
    from .iteration import (BallViolation, SupportOverflow, initial_triple,
                            iterate)
    from .parameters import SeedTooSmall, make_schedule, seed_search
    from .transport import StepCountTooSmall

    try:
        if args.search:
            found = seed_search(args.eps0, stages=max(args.stages, 1), c0=args.c0)
            if found["lambda0"] is None or found["lambda0"] > 2 ** 31:
                print("seed search landed outside the runnable range", file=sys.stderr)
                return EXIT_CAPACITY
            lambda0 = int(math.ceil(found["lambda0"]))
        else:
            lambda0 = args.lambda0
        grid = GridSpec(args.grid)
        sched = make_schedule(args.eps0, lambda0=lambda0,
                              stages=max(args.stages, 1), c0=args.c0)
        lam_top = sched.lam_int[args.stages] if args.stages >= 1 else lambda0
        if lam_top is None or args.grid < 8 * lam_top:
            raise CapacityError(
                f"grid {args.grid} cannot resolve stage frequency {lam_top}")
    except SeedTooSmall as exc:
        print(f"seed rejected: {exc}", file=sys.stderr)
        return EXIT_NO_SEED
    except (CapacityError, ValueError) as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CAPACITY if isinstance(exc, CapacityError) else EXIT_USAGE

    out_root = Path(args.out)
    fams = build_families()
    sched_snapshot = {
        "eps0": args.eps0, "lambda0": lambda0, "c0": args.c0,
        "stages": args.stages, "substeps": args.substeps,
        "samples": args.samples, "grid_n": args.grid,
        "lam": list(sched.lam_int),
        "log_mu": [None if math.isnan(x) else x for x in sched.log_mu],
        "log_ell": list(sched.log_ell),
        "eps1": sched.eps1, "seed": PROBE_SEED,
    }

    triple = initial_triple(lambda0, args.eps0, grid)
    times0 = sample_times(triple.support, n_equispaced=args.samples)
    report0 = StageReport(0, grid.n, triple.support, sched_snapshot)
    rows = _parallel_map(lambda t: build_time_row(triple, t), times0)
    report0.time_rows.extend(rows)
    snaps0 = ({f"v_{i:03d}": triple.v(t) for i, t in enumerate(times0)}
              if args.snapshots else None)
    emit_report(report0, out_root / "stage0", snapshots=snaps0)

    prev = triple
    try:
        for q_new in range(1, args.stages + 1):
            new = iterate(prev, sched, fams, grid, substeps=args.substeps)
            mu = sched.mu(q_new)
            times = sample_times(new.support, mu=mu, n_equispaced=args.samples)
            report = StageReport(q_new, grid.n, new.support, sched_snapshot)
            for t in times:
                report.add_time_row(**build_time_row(
                    new, t, sched=sched, q_new=q_new, prefer_analytic=False))
            ledger_times = times[:: max(1, len(times) // 5)]
            report.ledger_rows.extend(
                verify_stage_estimates(prev, new, sched, ledger_times))
            report.ledger_rows.append(nontrivial_margin(prev, new))
            report.extras["stage_norms"] = stage_norm_rows(prev, new, ledger_times)
            ctx = new.meta["context"]
            active_times = [t for t in times if ctx.active_windows(t)]
            report.extras["lemma_rows"] = track_lemma_quantities(
                ctx, sched, q_new - 1, active_times[:2])
            report.extras["dt_w_agreement"] = (
                ctx.dt_w_agreement(active_times[0]) if active_times else 0.0)
            bs = None
            try:
                from .parameters import bad_sets
                bset = bad_sets(sched, q_new)[q_new - 1]
                if bset.representable and bset.interval_count_hint() < 1e4:
                    bs = bset.intervals()
            except ValueError:
                bs = None
            report.badset_intervals = [list(iv) for iv in (bs or [])]
            snaps = ({f"v_{i:03d}": new.v(t) for i, t in enumerate(times)}
                     if args.snapshots else None)
            emit_report(report, out_root / f"stage{q_new}", snapshots=snaps)
            prev = new
    except BallViolation as exc:
        print(f"amplitude ball violation at stage {prev.q + 1}: {exc}", file=sys.stderr)
        return EXIT_BALL
    except SupportOverflow as exc:
        print(f"temporal support overflow: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except StepCountTooSmall as exc:
        print(f"flow resolution: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    print(f"run complete: {args.stages + 1} stage reports under {out_root}")
    return EXIT_OK


def cmd_params(args) -> int:
    from .parameters import (SeedTooSmall, check_global_inequalities,
                             check_localized_inequalities, dimension_threshold,
                             hausdorff_cover, localized_delta, make_schedule,
                             seed_search)

    d_min = dimension_threshold(args.eps0)
    payload = {"eps0": args.eps0, "d_min": d_min}
    try:
        if args.search:
            found = seed_search(args.eps0, stages=args.stages, c0=args.c0)
            payload["search"] = found
            sched = make_schedule(args.eps0, log_lambda0=found["log_lambda0"],
                                  stages=args.stages, c0=args.c0)
        elif args.lambda0 is not None:
            sched = make_schedule(args.eps0, lambda0=args.lambda0,
                                  stages=args.stages, c0=args.c0)
        else:
            print("params needs --lambda0 or --search", file=sys.stderr)
            return EXIT_USAGE
    except SeedTooSmall as exc:
        print(f"no passing seed: {exc}", file=sys.stderr)
        return EXIT_NO_SEED
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE

    rows = check_global_inequalities(sched)
    payload["global_ledger"] = rows
    payload["all_pass"] = all(r["passed"] for r in rows)
    d = args.d if args.d is not None else 0.5 * (1.0 + d_min)
    try:
        cover = [
            {"q_start": q, "log_truncated": c.log_truncated,
             "log_tail_bound": c.log_tail_bound, "diverges": c.diverges}
            for q, c in ((q, hausdorff_cover(sched, q, d))
                         for q in range(1, sched.stages + 1))]
        payload["cover"] = {"d": d, "rows": cover}
    except ValueError as exc:
        print(f"invalid cover exponent: {exc}", file=sys.stderr)
        return EXIT_USAGE
    loc = localized_delta(sched, 0.0)
    payload["localized"] = {
        "t0": 0.0, "escape_index": loc.escape_index,
        "floor_entry_offset": loc.floor_entry_offset,
        "ledger": check_localized_inequalities(sched, loc),
    }

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "params.json").write_text(json.dumps(payload, indent=2, sort_keys=True,
                                                    default=str) + "\n")
        slack_names = ("sum_lambda_23", "sum_delta_lambda", "ell_ratio",
                       "mu_ratio", "inv_lambda_mu")
        slack = {(r["name"], r["q"]): r["slack"] for r in rows}
        lines = ["q,log_lambda,log_delta,log_mu,log_ell,"
                 + ",".join(f"slack_{n}" for n in slack_names)]
        for q in range(sched.stages + 1):
            cells = [
                str(q), format(sched.log_lambda[q], ".17g"),
                format(sched.log_delta[q], ".17g"),
                format(sched.log_mu[q], ".17g") if q >= 1 else "",
                format(sched.log_ell[q], ".17g") if q < sched.stages else "",
            ]
            for name in slack_names:
                v = slack.get((name, q))
                cells.append(format(v, ".17g") if v is not None else "")
            lines.append(",".join(cells))
        (out / "schedule.csv").write_text("\n".join(lines) + "\n")
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(f"d_min = {d_min:.9g}")
        npass = sum(1 for r in rows if r["passed"])
        print(f"global ledger: {npass}/{len(rows)} rows pass")
        if "search" in payload:
            print(f"smallest passing seed: log lambda0 = "
                  f"{payload['search']['log_lambda0']:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .diagnostics import load_report

    try:
        data = load_report(args.indir)
    except (ValueError, OSError, KeyError) as exc:
        print(f"report rejected: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    mani = data["manifest"]
    rows = data["ledger"]
    checked = [r for r in rows if r["status"] == "checked"]
    passed = sum(1 for r in checked if r["passed"] == "True")
    print(f"stage {mani['stage']} on {mani['grid_n']}^3, "
          f"support [{mani['support'][0]:.4g}, {mani['support'][1]:.4g}]")
    print(f"time rows: {len(data['timeseries'])}, ledger rows: {len(rows)} "
          f"({passed}/{len(checked)} checked rows pass)")
    if args.json:
        print(json.dumps({"manifest": mani, "ledger_pass": passed,
                          "ledger_checked": len(checked)}, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------


def _emit(results: dict, args):
    if getattr(args, "json", False):
        print(json.dumps(results, indent=2, sort_keys=True))
    else:
        for c in results["checks"]:
            mark = "ok" if c["ok"] else "FAIL"
            print(f"[{mark}] {c['name']}" + (f"  {c['detail']}" if c["detail"] else ""))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cilab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("verify-geometry", help="frequency family invariants")
    g.add_argument("--json", action="store_true")
    g.add_argument("--family", help="verify a family JSON export instead")
    g.set_defaults(fn=cmd_verify_geometry)

    o = sub.add_parser("verify-operators", help="inverse divergence invariants")
    o.add_argument("--json", action="store_true")
    o.add_argument("--fields", type=int, default=50)
    o.add_argument("--out", help="write probe CSV tables here")
    o.set_defaults(fn=cmd_verify_operators)

    r = sub.add_parser("run", help="seed stage plus inductive steps")
    r.add_argument("--eps0", type=float, default=0.05)
    r.add_argument("--lambda0", type=int, default=4)
    r.add_argument("--stages", type=int, default=1)
    r.add_argument("--grid", type=int, default=128)
    r.add_argument("--substeps", type=int, default=16)
    r.add_argument("--samples", type=int, default=33)
    r.add_argument("--c0", type=float, default=10.0)
    r.add_argument("--out", required=True)
    r.add_argument("--search", action="store_true",
                   help="take the smallest ledger-passing seed instead of --lambda0")
    r.add_argument("--snapshots", action="store_true")
    r.set_defaults(fn=cmd_run)

    p = sub.add_parser("params", help="schedule and inequality ledgers")
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--lambda0", type=int)
    p.add_argument("--stages", type=int, default=8)
    p.add_argument("--c0", type=float, default=10.0)
    p.add_argument("--d", type=float)
    p.add_argument("--search", action="store_true")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_params)

    rep = sub.add_parser("report", help="validate and summarise a report directory")
    rep.add_argument("--in", dest="indir", required=True)
    rep.add_argument("--json", action="store_true")
    rep.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        _validate(args)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return args.fn(args)


def _validate(args):
    eps0 = getattr(args, "eps0", None)
    if eps0 is not None and not 0.0 < eps0 <= 0.1:
        raise ValueError(f"eps0 must lie in (0, 0.1], got {eps0}")
    stages = getattr(args, "stages", None)
    if stages is not None and not 0 <= stages <= 12:
        raise ValueError("stages must lie in 0..12")
    n = getattr(args, "grid", None)
    if n is not None and (n < 8 or n & (n - 1)):
        raise ValueError("grid must be a power of two >= 8")


if __name__ == "__main__":
    sys.exit(main())
