import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtri

from cfmmkit.curves import (
    CPMM,
    G3M,
    CEVNeutral,
    EntropyX,
    EntropyY,
    Range,
    analytic_density,
    bs_covered_call,
    cev_neutral_reserves,
    covered_call_at_expiry,
    curve_from_value,
    discretize,
    family_from_dict,
    family_to_dict,
)
from cfmmkit.errors import NonPositivePrice
from cfmmkit.profiles import reserves


def test_density_examples():
    assert analytic_density(EntropyY(), 2.0) == pytest.approx(0.5)
    assert analytic_density(EntropyX(), 2.0) == pytest.approx(0.25)
    assert analytic_density(CEVNeutral(C=1, nu=1, beta=1), 3.0) == pytest.approx(1 / 9)
    with pytest.raises(NonPositivePrice):
        analytic_density(CPMM(), 0.0)


def test_discretize_exact_cases():
    prof = discretize(Range(ell=2.5, pa=1500, pb=4000), [1500, 4000])
    assert prof.steps == [(1500.0, 4000.0, pytest.approx(2.5, rel=1e-14))]
    prof = discretize(CPMM(3.0), [1, 4])
    assert prof.ell[0] == pytest.approx(3.0, rel=1e-14)


def test_discretize_entropy_y_reserves():
    fam = EntropyY(C=math.e)
    prof = discretize(fam, np.geomspace(1e-6, math.e, 1000))
    for p in (0.1, 0.5, 1.0, 2.0):
        assert reserves(prof, p).x == pytest.approx(1 - math.log(p), rel=1e-3)


@pytest.mark.parametrize(
    "fam, p",
    [(CPMM(2.0), 3.0), (G3M(0.3, 1.5), 2.0), (EntropyY(5.0), 1.5), (EntropyX(10.0), 0.7), (Range(1.0, 1.0, 4.0), 2.0),
     (CEVNeutral(1.0, 0.5, 0.75), 2.0), (CEVNeutral(1.0, 0.5, 0.5, M=1e3), 2.0), (CEVNeutral(1.0, 0.5, 1.0), 2.0)],
)
def test_density_integrates_to_x(fam, p):
    hi = fam.support()[1]
    x_num = quad(lambda q: float(fam.density(q)), p, hi, epsabs=0, epsrel=1e-12, limit=500)[0]
    assert x_num == pytest.approx(fam.reserves(p)[0], rel=1e-8)


def test_cev_reserve_branches():
    r = cev_neutral_reserves(CEVNeutral(C=1, nu=1, beta=0.75), 1.0)
    assert (r.x, r.y) == (pytest.approx(2.0), pytest.approx(2.0))
    f = CEVNeutral(C=1, nu=1, beta=0.5, M=100.0)
    assert cev_neutral_reserves(f, 2.0).x == pytest.approx(math.log(100) - math.log(2))
    f = CEVNeutral(C=1, nu=1, beta=1.0, eps=0.01)
    assert cev_neutral_reserves(f, 2.0).y == pytest.approx(math.log(2) - math.log(0.01))


def test_cev_reserves_follow_g3m():
    beta = 0.8
    fam = CEVNeutral(C=1.3, nu=0.7, beta=beta)
    a = 2 - 2 * beta
    rng = np.random.default_rng(3)
    vals = []
    for p in rng.uniform(0.1, 50, 10):
        r = cev_neutral_reserves(fam, p)
        vals.append(r.x**a * r.y ** (1 - a))
    assert np.ptp(vals) / np.mean(vals) < 1e-10


def test_family_json_round_trip():
    f = Range(ell=1.0, pa=1500, pb=4000)
    assert family_from_dict(family_to_dict(f)) == f
    assert family_from_dict({"family": "range", "ell": 1.0, "pa": 1500, "pb": 4000}) == f


def test_covered_call_curve():
    K = 5.0
    spec = covered_call_at_expiry(K)
    p, y = curve_from_value(spec, 1.0)
    assert p <= K and y == 0.0
    p, y = curve_from_value(spec, 0.0)
    assert y == pytest.approx(K)
    for x in (0.2, 0.4, 0.9):
        p, y = curve_from_value(spec, x)
        assert K * x + y == pytest.approx(K, rel=1e-14)


def test_bs_covered_call_relation():
    K, v = 2.0, 0.3
    spec = bs_covered_call(K, v)
    for x in (0.05, 0.3, 0.7, 0.95):
        p, y = curve_from_value(spec, x)
        assert ndtri(1 - x) - ndtri(y / K) == pytest.approx(v, abs=1e-6)
