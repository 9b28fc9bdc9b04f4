import math

import numpy as np
import pytest

from cfmmkit.curves import CEVNeutral, EntropyX, EntropyY, discretize
from cfmmkit.dynamics import (
    CEV,
    GBM,
    PathConfig,
    decompose_il_path,
    gamma_swap_leg,
    iter_paths,
    lvr_along_path,
    lvr_neutral_check,
    lvr_price,
    lvr_statistics,
    psi,
    psi_prime,
    simulate_paths,
    variance_swap_leg,
)
from cfmmkit.profiles import LiquidityProfile
from cfmmkit.quadrature import adaptive_integrate


def test_zero_vol_gbm_is_deterministic():
    sim = simulate_paths(GBM(0.07, 0.0), PathConfig(2.0, 50, 3), 1.5)
    np.testing.assert_allclose(sim.paths[:, -1], 1.5 * math.exp(0.14), rtol=1e-13)


def test_seed_repeatability_and_layout_independence():
    cfg = PathConfig(1.0, 20, 10, seed=7)
    a = simulate_paths(GBM(0.0, 0.5), cfg, 1.0).paths
    b = simulate_paths(GBM(0.0, 0.5), cfg, 1.0).paths
    np.testing.assert_array_equal(a, b)
    c = np.vstack([s.paths for s in iter_paths(GBM(0.0, 0.5), cfg, 1.0, chunk=3)])
    np.testing.assert_array_equal(a, c)
    d = simulate_paths(GBM(0.0, 0.5), PathConfig(1.0, 20, 4, seed=7), 1.0).paths
    np.testing.assert_array_equal(a[:4], d)


def test_zero_liquidity_and_constant_path():
    path = simulate_paths(GBM(0.0, 0.5), PathConfig(1.0, 30, 2), 1.0).paths
    assert np.all(lvr_along_path(LiquidityProfile.range(0.0, 0.5, 2.0), path) == 0)
    prof = LiquidityProfile.range(1.0, 0.5, 2.0)
    dec = decompose_il_path(prof, np.ones((2, 10)), 1.0)
    for v in (dec.hedging_cost, dec.lvr, dec.il_direct):
        np.testing.assert_array_equal(v, 0.0)


def test_lvr_nondecreasing():
    path = simulate_paths(GBM(0.1, 0.8), PathConfig(1.0, 200, 20, seed=3), 1.0).paths
    lvr = lvr_along_path(LiquidityProfile.from_steps([(0.5, 1.0, 1.0), (1.0, 3.0, 2.0)]), path)
    assert np.all(np.diff(lvr, axis=1) >= 0)


def test_swap_identities():
    path = simulate_paths(GBM(0.0, 0.6), PathConfig(1.0, 500, 5, seed=1), 1.0).paths
    np.testing.assert_allclose(2 * lvr_along_path(EntropyY(1e9), path), gamma_swap_leg(path), rtol=1e-14, atol=1e-16)
    np.testing.assert_allclose(2 * lvr_along_path(EntropyX(30.0), path), variance_swap_leg(path), rtol=1e-14, atol=1e-16)


def test_cev_neutral_zero_c():
    res = lvr_neutral_check(CEVNeutral(0.0, 0.5, 1.0), PathConfig(1.0, 50, 100), 1.0)
    assert res.slope == 0.0 and res.target == 0.0


def test_psi_matches_quadrature_and_is_c1():
    prof = LiquidityProfile.from_steps([(0.5, 1.0, 1.0), (1.0, 3.0, 2.0), (4.0, 6.0, 0.5)], [(2.0, 0.3)])
    dens = lambda q: np.where(q < 1, 1.0, np.where(q < 3, 2.0, np.where((q >= 4) & (q < 6), 0.5, 0.0))) * (q >= 0.5) / (2 * q**1.5)
    for P in (0.7, 1.5, 2.5, 3.5, 5.0, 8.0):
        want = sum(adaptive_integrate(lambda q: dens(q) * (P - q), a, min(b, P), tol=1e-14) for a, b in ((0.5, 1), (1, 3), (4, 6)) if a < P)
        want += 0.3 * max(P - 2.0, 0.0)
        assert psi(prof, P) == pytest.approx(want, rel=1e-12)
    h = 1e-7
    for edge in (0.5, 1.0, 3.0, 4.0, 6.0):
        left = (psi(prof, edge) - psi(prof, edge - h)) / h
        right = (psi(prof, edge + h) - psi(prof, edge)) / h
        assert left == pytest.approx(right, rel=1e-5, abs=1e-6)
        assert psi(prof, edge - 1e-12) == pytest.approx(psi(prof, edge + 1e-12), abs=1e-10)
    assert psi_prime(prof, 2.5) == pytest.approx(1 * (1 / math.sqrt(0.5) - 1) + 2 * (1 - 1 / math.sqrt(2.5)) + 0.3)


def test_lvr_price_limits():
    prof = discretize(EntropyY(50.0), np.geomspace(1e-4, 50.0, 4001))
    assert lvr_price(prof, 0.5, 1.0, 0.0) == 0.0
    assert lvr_price(prof, 0.0, 1.0, 1.0) == 0.0
    # L = 1/q: expected LVR = sigma^2 p0 T / 2
    assert lvr_price(prof, 0.5, 1.0, 1.0) == pytest.approx(0.125, rel=1e-6)


@pytest.mark.slow
def test_lvr_price_matches_monte_carlo():
    prof = LiquidityProfile.from_steps([(0.5, 1.0, 1.0), (1.0, 2.0, 2.0)])
    cfg = PathConfig(1.0, 1000, 10_000, seed=11)
    mean, se, *_ = lvr_statistics(GBM(0.0, 0.4), prof, cfg, 1.0)
    assert abs(mean[-1] - lvr_price(prof, 0.4, 1.0, 1.0)) < 3 * se[-1]


def test_decomposition_residual_shrinks():
    prof = LiquidityProfile.from_steps([(0.5, 1.0, 1.0), (1.0, 2.0, 2.0)])
    med = []
    for steps in (100, 1000, 10000):
        path = simulate_paths(GBM(0.0, 0.5), PathConfig(1.0, steps, 50, seed=5), 1.0).paths
        dec = decompose_il_path(prof, path, 1.0)
        med.append(np.median(np.abs(dec.residual) / np.maximum(np.abs(dec.il_direct), 1e-4)))
    assert med[0] > med[1] > med[2]
    assert med[2] < 0.05


def test_cev_paths_absorb():
    sim = simulate_paths(CEV(2.0, 1.0), PathConfig(1.0, 200, 200, seed=2), 0.05)
    assert np.all(sim.paths >= 0)
    hit = sim.absorbed
    assert np.all(sim.paths[hit, -1] == 0)
