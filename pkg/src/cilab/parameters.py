"""Stage parameter calculus: double-exponential frequency schedules, the
global and time-localized inequality ledgers, bad-set geometry, and cover sums.

Everything is computed in natural-log space.  Frequencies are kept as exact
integers only while representable; past that they carry a log value and an
inexact flag.  Bad-set membership is three-valued (in / out / unknown) because
thin intervals at astronomically large frequencies cannot be located in
floating point; "out" answers carry either an exact or an almost-sure
certificate with the tail measure bound that backs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

LOG2 = math.log(2.0)
MAX_STAGES = 12


class SeedTooSmall(ValueError):
    """The requested seed frequency fails a scheduling inequality."""


@dataclass(frozen=True)
class ParameterSchedule:
    eps0: float
    c0: float
    stages: int                      # highest stage index Q
    log_lambda: tuple                # q = 0..Q
    lam_int: tuple                   # exact integers or None, q = 0..Q
    log_delta: tuple                 # q = 0..Q
    log_mu: tuple                    # q = 1..Q stored at index q (index 0 is nan)
    mu_floored: tuple                # whether the support floor was binding
    log_ell: tuple                   # q = 0..Q-1: ell_q = lam_{q+1}^(eps1 - 1)

    @property
    def alpha(self) -> float:
        return 1.0 + self.eps0

    @property
    def eps1(self) -> float:
        return self.eps0 ** 2 / 18.0

    def lam(self, q: int) -> float:
        return math.exp(self.log_lambda[q])

    def delta(self, q: int) -> float:
        return math.exp(self.log_delta[q])

    def mu(self, q: int) -> float:
        return math.exp(self.log_mu[q])

    def ell(self, q: int) -> float:
        return math.exp(self.log_ell[q])

    def log_lambda_extrapolated(self, q: int) -> float:
        if q <= self.stages:
            return self.log_lambda[q]
        return self.alpha ** (q - self.stages) * self.log_lambda[self.stages]

    def log_mu_extrapolated(self, q: int) -> float:
        if 1 <= q <= self.stages:
            return self.log_mu[q]
        ld = lambda j: (-0.4 + 2.0 * self.eps0) * self.log_lambda_extrapolated(j)
        formula = (0.25 * (ld(q - 1) + ld(q))
                   + 0.5 * (self.log_lambda_extrapolated(q - 1)
                            + self.log_lambda_extrapolated(q)))
        return max(formula, _support_floor_log(q))


def _support_floor_log(q: int) -> float:
    # 3 * 2^(q+1): meets the needed mu_q >= 2^(q+2) and keeps slice times off
    # the dyadic breakpoints of the seed bump when the floor binds
    return math.log(3.0) + (q + 1) * LOG2


def make_schedule(eps0: float, lambda0=None, stages: int = 8, c0: float = 10.0,
                  log_lambda0: float = None, strict: bool = False) -> ParameterSchedule:
    """Build the stage schedule; with strict=True reject seeds whose global
    inequality ledger has any failing row (naming the first failure)."""
    if not 0.0 < eps0 <= 0.1:
        raise ValueError(f"eps0 must lie in (0, 0.1], got {eps0}")
    if stages < 1 or stages > MAX_STAGES:
        raise ValueError(f"stages must lie in 1..{MAX_STAGES}")
    if c0 < 1.0:
        raise ValueError("c0 must be >= 1")
    if (lambda0 is None) == (log_lambda0 is None):
        raise ValueError("provide exactly one of lambda0, log_lambda0")
    if lambda0 is not None:
        if lambda0 < 2:
            raise ValueError("lambda0 must be at least 2")
        log_l0 = math.log(float(lambda0))
    else:
        if log_lambda0 < LOG2:
            raise ValueError("log_lambda0 must be at least ln 2")
        log_l0 = float(log_lambda0)

    alpha = 1.0 + eps0
    eps1 = eps0 ** 2 / 18.0
    log_lambda, lam_int = [], []
    for q in range(stages + 1):
        y = alpha ** q * log_l0
        if y < 36.0:  # floor(exp y) fits well inside 2^53
            val = int(math.floor(math.exp(y)))
            lam_int.append(val)
            log_lambda.append(math.log(val))
        else:
            lam_int.append(None)
            log_lambda.append(y)
    log_delta = [(-0.4 + 2.0 * eps0) * l for l in log_lambda]

    log_mu, mu_floored = [math.nan], [False]
    for q in range(1, stages + 1):
        formula = (0.25 * (log_delta[q - 1] + log_delta[q])
                   + 0.5 * (log_lambda[q - 1] + log_lambda[q]))
        floor_log = _support_floor_log(q)
        log_mu.append(max(formula, floor_log))
        mu_floored.append(formula < floor_log)

    log_ell = [(eps1 - 1.0) * log_lambda[q + 1] for q in range(stages)]

    sched = ParameterSchedule(eps0, float(c0), stages, tuple(log_lambda),
                              tuple(lam_int), tuple(log_delta), tuple(log_mu),
                              tuple(mu_floored), tuple(log_ell))
    if strict:
        for row in check_global_inequalities(sched):
            if not row["passed"]:
                raise SeedTooSmall(
                    f"seed fails {row['name']} at q = {row['q']} "
                    f"(slack {row['slack']:.4g})")
    return sched


def _log_sum_exp(logs) -> float:
    m = max(logs)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(l - m) for l in logs))


def _row(name, q, log_lhs, log_rhs):
    return {"name": name, "q": q, "log_lhs": log_lhs, "log_rhs": log_rhs,
            "slack": log_rhs - log_lhs, "passed": log_lhs <= log_rhs}


def check_global_inequalities(sched: ParameterSchedule, stages: int = None):
    """Per-stage ledger of the scheduling inequalities; failures are data."""
    Q = sched.stages if stages is None else min(stages, sched.stages)
    eps0, eps1 = sched.eps0, sched.eps1
    ll, ld, lm, le = sched.log_lambda, sched.log_delta, sched.log_mu, sched.log_ell
    rows = []
    for q in range(1, Q + 1):
        rows.append(_row("sum_lambda_23", q,
                         _log_sum_exp([(2.0 / 3.0) * ll[j] for j in range(q)]),
                         (2.0 / 3.0) * ll[q]))
        rows.append(_row("sum_delta_lambda", q,
                         _log_sum_exp([ld[j] + ll[j] for j in range(q)]),
                         ld[q] + ll[q]))
    for q in range(Q):
        rows.append(_row("ell_ratio", q,
                         0.5 * ld[q] + ll[q] + le[q] - 0.5 * ld[q + 1], 0.0))
        rows.append(_row("mu_ratio", q,
                         0.5 * ld[q] + ll[q] - lm[q + 1], -eps1 * ll[q + 1]))
        rows.append(_row("inv_lambda_mu", q,
                         -ll[q + 1], 0.5 * ld[q + 1] - lm[q + 1]))
    # seed-size summability with a geometric tail bound past the horizon
    exp_neg = -0.2 + eps0
    terms = [exp_neg * ll[j] for j in range(1, Q + 1)]
    log_ratio = exp_neg * (sched.log_lambda_extrapolated(Q + 1) - ll[Q])
    if log_ratio >= 0.0:
        tail = math.inf
    else:
        tail = terms[-1] + log_ratio - math.log1p(-math.exp(log_ratio))
    rows.append(_row("lambda_sum_negexp", Q,
                     _log_sum_exp(terms + [tail]), exp_neg * ll[0] - math.log(4.0)))
    rows.append(_row("lambda0_eighth", 0, exp_neg * ll[0] - math.log(4.0),
                     -math.log(8.0)))
    return rows


# ---------------------------------------------------------------------------
# bad sets


class Membership(Enum):
    IN = "in"
    OUT = "out"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class BadSet:
    """Stage-q union of cutoff-overlap intervals around half-integer slice gaps."""

    q: int
    log_mu: float
    log_radius_scaled: float   # log of lam_q^(-eps1), radius in mu t units

    @property
    def representable(self) -> bool:
        return self.log_mu < 300.0

    def interval_count_hint(self) -> float:
        return 2.0 * math.exp(self.log_mu)

    def log_total_length(self) -> float:
        # ~ 2 mu intervals, each of length 2 lam^(-eps1) / mu
        return math.log(4.0) + self.log_radius_scaled

    def intervals(self, cap: int = 10 ** 6):
        if not self.representable:
            raise ValueError("interval enumeration requires a representable mu")
        mu = math.exp(self.log_mu)
        radius = math.exp(self.log_radius_scaled)
        lmax = int(math.floor(mu))
        if 2 * lmax + 1 > cap:
            raise ValueError("too many intervals to enumerate")
        out = []
        for l in range(-lmax, lmax + 1):
            out.append(((l + 0.5 - radius) / mu, (l + 0.5 + radius) / mu))
        return out

    def membership(self, t: float) -> Membership:
        radius = math.exp(self.log_radius_scaled)
        if radius >= 0.5:
            # intervals overlap their neighbours: the union covers the window
            if abs(t) <= 1.0:
                return Membership.IN
        if t == 0.0:
            return Membership.OUT if radius < 0.5 else Membership.IN
        if not self.representable:
            return Membership.UNKNOWN
        mu = math.exp(self.log_mu)
        y = mu * t
        # float placement of mu t is trusted only well inside the resolution
        if abs(y) * 1e-14 > 0.1 * radius:
            return Membership.UNKNOWN
        frac = y - math.floor(y)
        return Membership.IN if abs(frac - 0.5) <= radius else Membership.OUT


def bad_sets(sched: ParameterSchedule, q_max: int):
    if q_max > sched.stages:
        raise ValueError("q_max exceeds the schedule horizon")
    sets = []
    for q in range(1, q_max + 1):
        sets.append(BadSet(q, sched.log_mu[q], -sched.eps1 * sched.log_lambda[q]))
    return sets


def union_tail_log_measure(sched: ParameterSchedule, q_from: int,
                           horizon: int = 400) -> float:
    """Log of an upper bound for the total length of all U sets with q >= q_from."""
    logs = []
    for q in range(q_from, q_from + horizon):
        logs.append(math.log(4.0) - sched.eps1 * sched.log_lambda_extrapolated(q))
        if logs[-1] < -800.0:
            break
    return _log_sum_exp(logs)


def membership_V(sched: ParameterSchedule, q: int, t: float, q_max: int = None):
    """Three-valued membership of t in the union of stage >= q bad sets.

    Returns (Membership, certificate).  An OUT verdict is exact when every
    stage answers out (possible only for special points like t = 0); otherwise
    it is almost-sure, certified by the log tail measure of the undecided part.
    """
    q = max(q, 1)
    q_max = sched.stages if q_max is None else q_max
    first_undecided = None
    for qq in range(q, q_max + 1):
        m = BadSet(qq, sched.log_mu[qq], -sched.eps1 * sched.log_lambda[qq]).membership(t)
        if m is Membership.IN:
            return Membership.IN, {"kind": "exact", "stage": qq}
        if m is Membership.UNKNOWN and first_undecided is None:
            first_undecided = qq
    if t == 0.0:
        # every stage past the horizon also answers out once lam^(-eps1) < 1/2
        if sched.eps1 * sched.log_lambda_extrapolated(q_max + 1) > LOG2:
            return Membership.OUT, {"kind": "exact"}
    start = first_undecided if first_undecided is not None else q_max + 1
    tail = union_tail_log_measure(sched, start)
    if tail < -math.log(1e6):
        return Membership.OUT, {"kind": "almost_sure", "log_tail_measure": tail}
    return Membership.UNKNOWN, {"log_tail_measure": tail}


# ---------------------------------------------------------------------------
# localized schedule


@dataclass(frozen=True)
class LocalizedSchedule:
    t0: float
    escape_index: object          # smallest q with t0 outside V^(q); None if never
    escape_certificate: dict
    log_delta_loc: tuple          # q = 0..Q
    floor_entry_offset: object    # N' from the exponent recursion; None if global

    def delta(self, q: int) -> float:
        return math.exp(self.log_delta_loc[q])


def floor_entry_offset(eps0: float) -> int:
    """Iterate the exponent recursion until the -2/3 floor binds (N')."""
    alpha = 1.0 + eps0
    step = eps0 ** 2 / (9.0 * alpha)
    floor = -2.0 / 3.0 + 2.0 * eps0
    f = -0.4 + 2.0 * eps0
    m = 0
    while f > floor + 1e-15:
        f = max(f - step, floor)
        m += 1
        if m > 10 ** 7:
            raise RuntimeError("floor recursion failed to terminate")
    return m


def localized_delta(sched: ParameterSchedule, t0: float,
                    q_max: int = None) -> LocalizedSchedule:
    if not -1.0 < t0 < 1.0:
        raise ValueError("t0 must lie in (-1, 1)")
    q_max = sched.stages if q_max is None else q_max
    escape, cert = None, {}
    for q in range(0, q_max + 1):
        m, c = membership_V(sched, max(q, 1), t0, q_max=q_max)
        if m is Membership.OUT:
            escape, cert = q, c
            break

    eps0 = sched.eps0
    alpha = sched.alpha
    ll = sched.log_lambda
    logs = list(sched.log_delta)
    if escape is not None:
        for q in range(escape, sched.stages):
            recur = -(eps0 ** 2 / 9.0) * ll[q] + alpha * logs[q]
            floor = (-2.0 / 3.0 + 2.0 * eps0) * ll[q + 1]
            logs[q + 1] = max(recur, floor)
            # growth of delta_{q,t0} lambda_q by at least lambda_q^(eps0/3);
            # the source display has the fraction inverted
            growth = (logs[q + 1] + ll[q + 1]) - (logs[q] + ll[q])
            if growth < (eps0 / 3.0) * ll[q] - 1e-9:
                raise AssertionError("localized summability growth violated")
        offset = floor_entry_offset(eps0)
    else:
        offset = None
    for q in range(sched.stages + 1):
        if logs[q] > sched.log_delta[q] + 1e-12:
            raise AssertionError("localized delta exceeded the global value")
    return LocalizedSchedule(t0, escape, cert, tuple(logs), offset)


NOT_CHECKED_LOCALIZED = ("loc_inv_lambda_mu",)


def check_localized_inequalities(sched: ParameterSchedule,
                                 loc: LocalizedSchedule, stages: int = None):
    Q = sched.stages if stages is None else min(stages, sched.stages)
    eps1 = sched.eps1
    ll, lm, le = sched.log_lambda, sched.log_mu, sched.log_ell
    ld = loc.log_delta_loc
    rows = []
    for q in range(1, Q + 1):
        rows.append(_row("loc_sum_delta_lambda", q,
                         _log_sum_exp([ld[j] + ll[j] for j in range(q)]),
                         ld[q] + ll[q]))
    for q in range(Q):
        rows.append(_row("loc_ell_ratio", q,
                         0.5 * ld[q] + ll[q] + le[q] - 0.5 * ld[q + 1], 0.0))
        rows.append(_row("loc_mu_ratio", q,
                         0.5 * ld[q] + ll[q] - lm[q + 1], -eps1 * ll[q + 1]))
    return rows


# ---------------------------------------------------------------------------
# Hausdorff cover


def dimension_threshold(eps0: float) -> float:
    """Smallest admissible cover exponent d (closed form)."""
    alpha = 1.0 + eps0
    eps1 = eps0 ** 2 / 18.0
    top = (1.0 + alpha) * (0.8 + eps0)
    return top / (top + 2.0 * alpha * eps1)


@dataclass(frozen=True)
class CoverSum:
    q_start: int
    d: float
    d_min: float
    diverges: bool
    log_truncated: float
    log_tail_bound: float

    @property
    def log_total(self) -> float:
        return _log_sum_exp([self.log_truncated, self.log_tail_bound])


def hausdorff_cover(sched: ParameterSchedule, q_start: int, d: float,
                    q_trunc: int = 60) -> CoverSum:
    """Log-space evaluation of 3 * sum over q' >= q_start of
    lam^(-d eps1) mu^(1-d), truncated with a geometric tail bound."""
    if not 0.0 < d < 1.0:
        raise ValueError("d must lie in (0, 1); the threshold requires d < 1 strictly")
    if q_start < 1:
        raise ValueError("q_start must be at least 1")
    d_min = dimension_threshold(sched.eps0)
    diverges = d <= d_min
    eps1 = sched.eps1

    def log_term(q):
        return (-d * eps1 * sched.log_lambda_extrapolated(q)
                + (1.0 - d) * sched.log_mu_extrapolated(q))

    logs = [log_term(q) for q in range(q_start, max(q_start + 1, q_trunc + 1))]
    truncated = math.log(3.0) + _log_sum_exp(logs)
    last = logs[-1]
    nxt = log_term(q_start + len(logs))
    if diverges or nxt >= last:
        tail = math.inf
    else:
        r = math.exp(nxt - last)
        tail = math.log(3.0) + nxt - math.log(1.0 - r)
    return CoverSum(q_start, d, d_min, diverges, truncated, tail)


# ---------------------------------------------------------------------------
# seed search


def _seed_passes(eps0: float, stages: int, c0: float, log_l0: float) -> bool:
    sched = make_schedule(eps0, log_lambda0=log_l0, stages=stages, c0=c0)
    return all(r["passed"] for r in check_global_inequalities(sched))


def seed_search(eps0: float, stages: int = 8, c0: float = 10.0,
                log2_bound: float = 2.0 ** 20, rel_tol: float = 1e-9):
    """Smallest seed (in log space, bisected) whose global ledger passes.

    Returns a dict with the log seed and, when representable, the seed value.
    Raises SeedTooSmall when even the upper bound fails.
    """
    hi = log2_bound * LOG2
    if not _seed_passes(eps0, stages, c0, hi):
        raise SeedTooSmall(f"no passing seed with log2(lambda0) <= {log2_bound}")
    lo = LOG2
    if _seed_passes(eps0, stages, c0, lo):
        hi = lo
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _seed_passes(eps0, stages, c0, mid):
            hi = mid
        else:
            lo = mid
    return {"log_lambda0": hi,
            "lambda0": math.exp(hi) if hi < 700.0 else None,
            "stages": stages, "eps0": eps0}
