import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfmmkit.curves import EntropyY, discretize
from cfmmkit.errors import AtomAtPrice, BadRange
from cfmmkit.payoff import il, il_delta_realized, il_gamma_realized, il_many, tripartite
from cfmmkit.profiles import LiquidityProfile, combine

from conftest import step_profiles


def test_wide_range_il():
    prof = LiquidityProfile.from_steps([(1e-12, 1e12, 1.0)])
    assert il(prof, 1.0, 4.0).total == pytest.approx(1.0, rel=1e-5)


def test_entropy_il():
    prof = discretize(EntropyY(math.e), np.geomspace(1e-8, math.e, 20001))
    assert il(prof, 1.0, math.e).total == pytest.approx(1.0, rel=1e-3)


@given(step_profiles(), st.floats(0.2, 30))
def test_il_zero_at_p0(prof, p0):
    assert il(prof, p0, p0).total == 0.0


def test_delta_examples():
    prof = LiquidityProfile.from_steps([(1, 4, 2.0)])
    assert il_delta_realized(prof, 1.0, 9.0) == pytest.approx(1.0)
    assert il_delta_realized(prof, 2.0, 2.0) == 0.0
    r = LiquidityProfile.range(3.0, 1.0, 10.0)
    assert il_delta_realized(r, 2.0, 5.0) == pytest.approx(3 / math.sqrt(2) - 3 / math.sqrt(5))


def test_gamma_examples():
    r = LiquidityProfile.range(3.0, 1.0, 10.0)
    assert il_gamma_realized(r, 4.0) == pytest.approx(3 / (2 * 8))
    assert il_gamma_realized(r, 20.0) == 0.0
    with pytest.raises(AtomAtPrice):
        il_gamma_realized(LiquidityProfile.from_steps(atoms=[(3.0, 1.0)]), 3.0)


def test_tripartite_branches():
    p0, pa, pb = 4.0, 1.0, 9.0
    assert tripartite(p0, pa, pb, 2.0)[3] == pytest.approx(math.sqrt(p0) - 2 * math.sqrt(2) + 2 / math.sqrt(p0))
    pt = 0.5
    assert tripartite(p0, pa, pb, pt)[3] == pytest.approx(math.sqrt(p0) - math.sqrt(pa) - pt / math.sqrt(pa) + pt / math.sqrt(p0))
    with pytest.raises(BadRange):
        tripartite(1.0, 2.0, 3.0, 1.5)


@given(step_profiles(), st.floats(0.2, 30), st.floats(0.2, 30))
def test_replication_forms_agree(prof, p0, pt):
    b = il(prof, p0, pt)
    two = b.put_leg + b.call_leg + b.atom_contrib
    assert b.total == pytest.approx(two, rel=1e-12, abs=1e-14)
    assert b.total >= -1e-14


@given(step_profiles(atoms=False), st.floats(0.6, 19), st.floats(0.6, 19))
def test_derivatives_match_finite_differences(prof, p0, pt):
    h = 1e-6 * pt
    edges = np.concatenate([prof.lo, prof.hi])
    if np.min(np.abs(edges - pt)) < 1e3 * h:
        return
    fd = (il(prof, p0, pt + h).total - il(prof, p0, pt - h).total) / (2 * h)
    assert fd == pytest.approx(il_delta_realized(prof, p0, pt), rel=1e-6, abs=1e-8)
    fd2 = (il_delta_realized(prof, p0, pt + h) - il_delta_realized(prof, p0, pt - h)) / (2 * h)
    assert fd2 == pytest.approx(il_gamma_realized(prof, pt), rel=1e-5, abs=1e-7)


@given(step_profiles(), step_profiles(), st.floats(0, 3), st.floats(0, 3), st.floats(0.3, 25))
def test_linearity(p1, p2, a, b, pt):
    c = combine(p1, p2, weights=(a, b))
    lhs = il(c, 5.0, pt).total
    rhs = a * il(p1, 5.0, pt).total + b * il(p2, 5.0, pt).total
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


def test_il_many_matches_scalar():
    prof = LiquidityProfile.from_steps([(1, 3, 2.0), (3, 8, 0.5)], [(5.0, 0.3)])
    pts = np.linspace(0.5, 10, 37)
    np.testing.assert_allclose(il_many(prof, 2.0, pts), [il(prof, 2.0, p).total for p in pts], rtol=1e-13)
