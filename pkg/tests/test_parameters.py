import math

import numpy as np
import pytest

from cilab.parameters import (BadSet, CoverSum, Membership, SeedTooSmall,
                              check_global_inequalities,
                              check_localized_inequalities,
                              NOT_CHECKED_LOCALIZED, bad_sets,
                              dimension_threshold, floor_entry_offset,
                              hausdorff_cover, localized_delta, make_schedule,
                              membership_V, seed_search)

D_MIN_005 = 0.9998326439859422
FLOOR_OFFSET_005 = 1009


def test_schedule_basics():
    s = make_schedule(0.05, lambda0=4, stages=2)
    assert s.alpha == 1.05
    assert abs(s.eps1 - 0.05 ** 2 / 18.0) < 1e-18
    assert s.lam_int[0] == 4
    # floor stays within the doubling envelope
    for q in range(s.stages + 1):
        target = 1.05 ** q * math.log(4.0)
        assert 0.5 * math.exp(target) < s.lam(q) < 2.0 * math.exp(target)
    # support floor: mu_q >= 2^(q+2)
    for q in range(1, s.stages + 1):
        assert s.mu(q) >= 2.0 ** (q + 2)
    assert s.mu(1) == 12.0 and s.mu_floored[1]


def test_mu_formula_identity_when_unfloored():
    s = make_schedule(0.05, log_lambda0=250.0, stages=6)
    for q in range(1, 7):
        assert not s.mu_floored[q]
        lhs = 2.0 * s.log_mu[q]
        rhs = 0.5 * (s.log_delta[q - 1] + s.log_delta[q]) \
            + s.log_lambda[q - 1] + s.log_lambda[q]
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_monotonicity_of_sequences():
    s = make_schedule(0.05, log_lambda0=300.0, stages=8)
    for q in range(8):
        assert s.log_lambda[q + 1] > s.log_lambda[q]
        assert s.log_delta[q + 1] < s.log_delta[q]


def test_schedule_validation():
    with pytest.raises(ValueError):
        make_schedule(0.5, lambda0=4)
    with pytest.raises(ValueError):
        make_schedule(0.05, lambda0=1)
    with pytest.raises(ValueError):
        make_schedule(0.05, lambda0=4, stages=30)
    with pytest.raises(ValueError):
        make_schedule(0.05)


def test_strict_mode_names_first_failure():
    with pytest.raises(SeedTooSmall, match="sum_lambda_23"):
        make_schedule(0.05, lambda0=2, stages=4, strict=True)


def test_global_ledger_rows_and_desk_failures():
    s = make_schedule(0.05, lambda0=2, stages=4)
    rows = check_global_inequalities(s)
    names = {r["name"] for r in rows}
    assert names == {"sum_lambda_23", "sum_delta_lambda", "ell_ratio",
                     "mu_ratio", "inv_lambda_mu", "lambda_sum_negexp",
                     "lambda0_eighth"}
    assert any(not r["passed"] for r in rows)


def test_passing_seed_and_slack_monotonicity():
    found = seed_search(0.05, stages=8)
    s = make_schedule(0.05, log_lambda0=found["log_lambda0"], stages=8)
    rows = check_global_inequalities(s)
    assert all(r["passed"] for r in rows)
    for name in ("sum_lambda_23", "sum_delta_lambda"):
        slacks = [r["slack"] for r in rows if r["name"] == name]
        assert all(b >= a - 1e-9 for a, b in zip(slacks, slacks[1:]))


def test_seed_search_deterministic_and_bounded():
    a = seed_search(0.05, stages=8)
    b = seed_search(0.05, stages=8)
    assert a == b
    with pytest.raises(SeedTooSmall):
        seed_search(0.05, stages=8, log2_bound=16.0)


def test_dimension_threshold_closed_form():
    assert abs(dimension_threshold(0.05) - D_MIN_005) < 1e-15
    # closed-form oracle evaluated independently
    alpha, eps1 = 1.05, 0.05 ** 2 / 18.0
    top = (1 + alpha) * (-0.2 + 0.05 + 1.0)
    assert abs(dimension_threshold(0.05) - top / (top + 2 * alpha * eps1)) < 1e-15
    for eps0 in (0.01, 0.02, 0.05, 0.1):
        dm = dimension_threshold(eps0)
        assert dm < 1.0
        assert (1.0 - dm) / eps0 ** 2 > 0.01  # measured positive c in 1 - d > c eps^2


def test_hausdorff_cover_behaviour():
    s = make_schedule(0.05, log_lambda0=1e6, stages=8)
    d = 0.5 * (1.0 + D_MIN_005)
    sums = [hausdorff_cover(s, q, d) for q in range(1, 9)]
    totals = [c.log_total for c in sums]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert all(not c.diverges for c in sums)
    assert sums[7].log_tail_bound - sums[0].log_total < math.log(1e-3)
    div = hausdorff_cover(s, 1, D_MIN_005 * 0.999)
    assert div.diverges
    with pytest.raises(ValueError):
        hausdorff_cover(s, 1, 1.0)


def test_badset_geometry_desk_scale():
    s = make_schedule(0.05, lambda0=4, stages=2)
    sets = bad_sets(s, 2)
    b1 = sets[0]
    assert b1.q == 1
    ivs = b1.intervals()
    assert len(ivs) == 2 * int(math.exp(b1.log_mu)) + 1
    # radius ~ 1 at desk scale: overlapping intervals cover the window
    assert b1.membership(0.123) is Membership.IN
    # total length formula: 4 lam^(-eps1)
    assert abs(b1.log_total_length() - (math.log(4.0)
               - s.eps1 * s.log_lambda[1])) < 1e-12


def test_badset_membership_log_regime():
    s = make_schedule(0.05, log_lambda0=1e6, stages=4)
    b = bad_sets(s, 1)[0]
    assert b.membership(0.0) is Membership.OUT
    assert b.membership(0.37) is Membership.UNKNOWN  # mu not representable
    m, cert = membership_V(s, 1, 0.0)
    assert m is Membership.OUT and cert["kind"] == "exact"
    m2, cert2 = membership_V(s, 1, 0.37)
    assert m2 is Membership.OUT and cert2["kind"] == "almost_sure"
    assert cert2["log_tail_measure"] < math.log(1e-6)


def test_disjoint_intervals_when_radius_small():
    s = make_schedule(0.05, log_lambda0=1e6, stages=2)
    b = bad_sets(s, 1)[0]
    assert math.exp(b.log_radius_scaled) < 0.5  # spacing 1/mu beats the radius


def test_localized_delta_global_case():
    s = make_schedule(0.05, lambda0=4, stages=2)
    loc = localized_delta(s, 0.37)
    assert loc.escape_index is None
    assert loc.log_delta_loc == s.log_delta
    assert loc.floor_entry_offset is None
    rows = check_localized_inequalities(s, loc)
    globals_ = {(r["name"].replace("loc_", ""), r["q"]): r["slack"]
                for r in check_global_inequalities(s)}
    for r in rows:
        key = (r["name"].replace("loc_", ""), r["q"])
        assert abs(r["slack"] - globals_[key]) < 1e-12


def test_localized_delta_escaping_case():
    s = make_schedule(0.05, log_lambda0=1e6, stages=8)
    loc = localized_delta(s, 0.37)
    assert loc.escape_index == 0
    for q in range(9):
        assert loc.log_delta_loc[q] <= s.log_delta[q] + 1e-12
    assert loc.floor_entry_offset == FLOOR_OFFSET_005
    rows = check_localized_inequalities(s, loc)
    assert all(r["passed"] for r in rows)
    assert {r["name"] for r in rows} == {"loc_sum_delta_lambda", "loc_ell_ratio",
                                         "loc_mu_ratio"}
    # the dropped global inequality stays dropped
    assert "loc_inv_lambda_mu" in NOT_CHECKED_LOCALIZED
    assert not any(r["name"] == "loc_inv_lambda_mu" for r in rows)


def test_floor_offset_identical_across_t0():
    s = make_schedule(0.05, log_lambda0=1e6, stages=6)
    r = np.random.default_rng(5)
    offsets = set()
    escapes = set()
    for t0 in r.uniform(-0.9, 0.9, 100):
        loc = localized_delta(s, float(t0))
        offsets.add(loc.floor_entry_offset)
        escapes.add(loc.escape_index)
    assert offsets == {FLOOR_OFFSET_005}
    assert escapes == {0}
    assert floor_entry_offset(0.05) == FLOOR_OFFSET_005


def test_t0_validation():
    s = make_schedule(0.05, lambda0=4, stages=2)
    with pytest.raises(ValueError):
        localized_delta(s, 1.5)
