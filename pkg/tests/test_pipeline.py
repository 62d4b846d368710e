"""Degree bounds, staged runs, and the certification battery."""

import math
from fractions import Fraction

import pytest

from pvforge.errors import SingularPointError, TowerBudgetError
from pvforge.fields import K, parse_ratfunc
from pvforge.ideals import groebner, ideal_equal, zero_dim_degree
from pvforge.mpoly import parse_mpoly
from pvforge.pipeline import (
    PipelineConfig,
    VerifyReport,
    base_points,
    dn_bound,
    kappa_bound,
    pv_ring,
    run_kbar,
    run_toric,
    toric_ideal,
    verify,
)

t = K.gen
one = K.one
zero = K.zero


def rf(s):
    return parse_ratfunc(s)


def gens_in(ring, *texts):
    return groebner([parse_mpoly(ring, s) for s in texts], ring)


SQRT = [[rf("1/(2*t)")]]
EXP = [[one]]


# ---------------------------------------------------------------------------
# bounds


def test_dn_small_values():
    assert dn_bound(1) == 2
    assert dn_bound(2) == 6
    assert dn_bound(3) == 360


def test_dn_general_formula():
    assert dn_bound(4) == 16**48
    assert dn_bound(5) == 20**75


def test_dn_rejects_nonpositive():
    with pytest.raises(ValueError):
        dn_bound(0)


def test_kappa_leading_factor_n1():
    kb = kappa_bound(1)
    assert kb.leading_base == 2 and kb.leading_exponent == 24
    assert kb.leading_factor() == 2**24
    # at n = 1 the binomial collapses, so the text carries the exact value
    assert "16777216" in kb.text


def test_kappa_n2_stays_symbolic():
    kb = kappa_bound(2)
    assert kb.leading_base == 4 and kb.leading_exponent == 12288
    assert "4^12288" in kb.text
    assert "C(b, floor(b/2))^2" in kb.text
    # 7399 digits: the decimal expansion must not be inlined
    assert len(kb.text) < 500


def test_kappa_leading_factor_refuses_huge():
    kb = kappa_bound(3)
    with pytest.raises(ValueError):
        kb.leading_factor()


# ---------------------------------------------------------------------------
# base points


def test_base_point_skips_poles():
    pts = base_points(SQRT, 3)
    assert pts[0] == 1 and 0 not in pts


def test_base_point_prefers_zero():
    assert base_points(EXP, 3)[0] == 0


def test_explicit_point_is_respected():
    t0, toric, log = run_toric(SQRT, PipelineConfig(degree=2, point=Fraction(4)))
    assert t0 == 4


def test_explicit_singular_point_is_an_error():
    cfg = PipelineConfig(degree=2, point=Fraction(0))
    with pytest.raises(SingularPointError):
        run_toric(SQRT, cfg)


# ---------------------------------------------------------------------------
# toric stage


def test_toric_exp_is_the_zero_ideal():
    res = toric_ideal(EXP, nu=2)
    assert res.gens == []
    assert res.group.is_full_group()


def test_toric_sqrt():
    res = toric_ideal(SQRT, nu=2, t0=1)
    ring = res.ring
    assert ideal_equal(groebner(res.gens, ring), gens_in(ring, "X11^2 - t"))
    # the stabilizer is the order-two group g^2 = 1
    assert zero_dim_degree(res.group.gb, res.group.ring, assume_gb=True) == 2


def test_run_toric_reports_the_point():
    t0, toric, log = run_toric(SQRT, PipelineConfig(degree=2))
    assert t0 == 1
    assert any("degree 2" in entry for entry in log)


# ---------------------------------------------------------------------------
# full runs


def test_pv_ring_exp():
    res = pv_ring(EXP, PipelineConfig(degree=2))
    assert res.gens == []
    assert res.group.is_full_group()
    assert res.t0 == 0


def test_pv_ring_sqrt():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    ring = res.ring
    assert ideal_equal(groebner(res.gens, ring), gens_in(ring, "X11^2 - t"))
    assert zero_dim_degree(res.group.gb, res.group.ring, assume_gb=True) == 2
    assert res.descent.orbit_size == 2
    assert all(line.startswith("PASS") or ":" in line for line in res.log)


def test_pv_ring_verification_lines_present():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    passes = [line for line in res.log if line.startswith("PASS")]
    assert len(passes) == 9


def test_tower_budget_propagates():
    with pytest.raises(TowerBudgetError):
        pv_ring(SQRT, PipelineConfig(degree=2, tower_budget=1))


# ---------------------------------------------------------------------------
# the battery as a standalone check


def test_verify_passes_on_a_fresh_result():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    report = verify(res)
    assert isinstance(report, VerifyReport)
    assert report.ok
    assert all(ok for _, ok, _ in report.items)


def test_verify_catches_a_dropped_generator():
    # forgetting a generator of m leaves a variety that is too big for the
    # group, so the torsor dimension comparison must fail
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    res.descent.gens = []
    report = verify(res)
    assert not report.ok
    failed = [name for name, ok, _ in report.items if not ok]
    assert any("torsor" in name for name in failed)


def test_verify_catches_a_wrong_generator():
    res = pv_ring(SQRT, PipelineConfig(degree=2))
    res.descent.gens = [parse_mpoly(res.ring, "X11^2 - t - 1")]
    report = verify(res)
    assert not report.ok
    failed = [name for name, ok, _ in report.items if not ok]
    assert any("series" in name for name in failed)
