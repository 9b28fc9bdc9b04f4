"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line with the measured error and wall
time, then asserts. Wall-time budgets are part of each criterion; numba
kernels are compiled once up front so the budgets measure steady-state cost.

Run just this file with ``pytest -v -s tests/test_acceptance.py`` (the lines
are printed even without ``-s``).
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor

import mpmath as mp
import numpy as np
import pytest
from scipy.special import ndtri

from cfmmkit.cli import load_liquidity
from cfmmkit.curves import CEVNeutral, EntropyX, EntropyY, bs_covered_call, covered_call_at_expiry, curve_from_value
from cfmmkit.data import build_proxy, clean_quotes, load_snapshot, snapshot_to_dict, synthesize_missing
from cfmmkit.dynamics import GBM, PathConfig, decompose_il_path, gamma_swap_leg, lvr_along_path
from cfmmkit.dynamics import lvr_neutral_check, simulate_paths, variance_swap_leg
from cfmmkit.implied import bins_to_csv, fine_structure, invert_global
from cfmmkit.lastpassage import ExitParams, expected_pnl, exponential_profile, optimal_exit, v_prime
from cfmmkit.models import MarketConventions
from cfmmkit.payoff import il, tripartite
from cfmmkit.pricing import all_calls_il_price, bachelier_aux_integral, market_il_price, model_il_price, remainder_sum
from cfmmkit.profiles import LiquidityProfile, intrinsic_liquidity_from_partials
from cfmmkit.quadrature import adaptive_integrate

from conftest import FIXTURES, bs_proxy

CONV = MarketConventions(F=3000.0, T=0.25, P0=3000.0)
RESOLUTIONS = (1, 3, 6, 12, "finest")


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    prof = LiquidityProfile.range(1.0, 0.5, 2.0)
    path = simulate_paths(GBM(0.0, 0.5), PathConfig(1.0, 4, 2), 1.0).paths
    decompose_il_path(prof, path, 1.0)
    remainder_sum(LiquidityProfile.range(1.0, 1.0001**80000, 1.0001**80100), CONV)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\n{status} [{number:2d}] {title}: {detail} ({elapsed:.2f}s, budget {budget:g}s)")
        assert ok, detail
        assert within, f"took {elapsed:.2f}s, budget {budget:g}s"

    return emit


def _g3m_partials(a, x, y):
    fx = a * x ** (a - 1) * y ** (1 - a)
    fy = (1 - a) * x**a * y ** (-a)
    fxx = a * (a - 1) * x ** (a - 2) * y ** (1 - a)
    fxy = a * (1 - a) * x ** (a - 1) * y ** (-a)
    fyy = (1 - a) * (-a) * x**a * y ** (-a - 1)
    return fx, fy, fxx, fxy, fyy


def test_criterion_01_canonical_parametrization(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for x, y, a in zip(rng.uniform(0.01, 100, 1000), rng.uniform(0.01, 100, 1000), rng.uniform(0.05, 0.95, 1000)):
        f = math.sqrt(x * y)
        cpmm = intrinsic_liquidity_from_partials(y / (2 * f), x / (2 * f), -(y * y) / (4 * f**3), 1 / (4 * f), -(x * x) / (4 * f**3))
        g3m = intrinsic_liquidity_from_partials(*_g3m_partials(a, x, y))
        worst = max(worst, abs(cpmm / f - 1), abs(g3m / (2 * math.sqrt(a * (1 - a)) * f) - 1))
    report(1, "canonical parametrization (CPMM, G3M)", worst <= 1e-10, f"max rel err {worst:.2e}", time.perf_counter() - t0, 1)


def _left_riemann(density, a, b, n):
    q = np.linspace(a, b, n + 1)
    ell = 2 * q[:-1] ** 1.5 * density(q[:-1])
    return LiquidityProfile.from_steps(list(zip(q[:-1], q[1:], ell)))


def test_criterion_02_closed_form_il(report):
    t0 = time.perf_counter()
    cases = (
        (lambda q: 1 / q, lambda p0, pt: pt * math.log(pt / p0) - pt + p0),
        (lambda q: 1 / q**2, lambda p0, pt: pt / p0 - 1 - math.log(pt / p0)),
    )
    errs = {}
    for n in (1000, 10_000):
        worst = 0.0
        for dens, exact in cases:
            for pt in (0.5, 2.0):
                prof = _left_riemann(dens, min(1.0, pt), max(1.0, pt), n)
                worst = max(worst, abs(il(prof, 1.0, pt).total / exact(1.0, pt) - 1))
        errs[n] = worst
    order = math.log10(errs[1000] / errs[10_000])
    ok = errs[10_000] <= 1e-3 and 0.8 <= order <= 1.2
    report(2, "IL closed forms for L=1/q and 1/q^2", ok, f"rel err {errs[10_000]:.2e} at 1e4 steps, order {order:.2f}", time.perf_counter() - t0, 1)


def test_criterion_03_tripartite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        pa, p0, pb = np.sort(rng.uniform(0.1, 50, 3))
        pt = rng.uniform(0.05, 80)
        u = tripartite(p0, pa, pb, pt)
        strip = il(LiquidityProfile.range(1.0, pa, pb), p0, pt).total
        worst = max(worst, abs(u[0] + u[1] + u[2] - strip) / max(abs(strip), 1.0))
    report(3, "tripartite identity", worst <= 1e-12, f"max err {worst:.2e}", time.perf_counter() - t0, 1)


def test_criterion_04_swap_legs_and_cev_slope(report):
    t0 = time.perf_counter()
    path = simulate_paths(GBM(0.0, 0.6), PathConfig(1.0, 1000, 20, seed=4), 1.0).paths
    gam, var = gamma_swap_leg(path), variance_swap_leg(path)
    e_gamma = np.max(np.abs(2 * lvr_along_path(EntropyY(1e9), path) - gam) / np.maximum(np.abs(gam), 1e-300))
    e_var = np.max(np.abs(2 * lvr_along_path(EntropyX(40.0), path) - var) / np.maximum(np.abs(var), 1e-300))
    res = lvr_neutral_check(CEVNeutral(0.02, 0.5, 1.0), PathConfig(1.0, 1000, 10_000, seed=4), 1.0)
    slope_err = abs(res.slope / res.target - 1)
    ok = e_gamma <= 1e-14 and e_var <= 1e-14 and slope_err <= 0.05
    detail = f"gamma {e_gamma:.1e}, variance {e_var:.1e}, CEV slope {res.slope:.5f} vs {res.target:.5f} ({slope_err:.1%})"
    report(4, "gamma/variance-swap LVR and LVR-neutral CEV", ok, detail, time.perf_counter() - t0, 60)


def test_criterion_05_il_decomposition(report):
    t0 = time.perf_counter()
    prof = LiquidityProfile.range(1.0, 0.5, 2.0)
    model = GBM(0.0, 0.5)
    single = decompose_il_path(prof, simulate_paths(model, PathConfig(1.0, 10_000, 1, seed=5), 1.0).paths, 1.0)
    rel = float(abs(single.residual[0]) / max(abs(single.il_direct[0]), 1e-4))
    steps = np.array([100, 1000, 10_000])
    mean_err = []
    for n in steps:
        dec = decompose_il_path(prof, simulate_paths(model, PathConfig(1.0, int(n), 200, seed=5), 1.0).paths, 1.0)
        mean_err.append(np.mean(np.abs(dec.residual)))
    rate = float(np.polyfit(np.log(steps), np.log(mean_err), 1)[0])
    # the residual must vanish at least as fast as steps**-0.5
    ok = rel <= 0.05 and rate <= -0.45
    report(5, "IL decomposition", ok, f"residual {rel:.2%} of scale at 1e4 steps, mean residual ~ steps^{rate:.2f}", time.perf_counter() - t0, 30)


def test_criterion_06_bachelier_table(report):
    t0 = time.perf_counter()
    mp.mp.dps = 40
    F, s, a, b = 3000.0, 300.0, 2100.0, 3900.0
    ref = float(mp.quad(lambda K: mp.ncdf((F - K) / s) / mp.sqrt(K), mp.linspace(a, b, 10)))
    err = {n: abs(bachelier_aux_integral(a, b, F, s, n=n)[0] / ref - 1) for n in (8, 16, 32)}
    ok = 6e-8 <= err[8] <= 6e-6 and err[16] <= 2e-14 and err[32] < 1e-15
    detail = ", ".join(f"n={n}: {e:.1e}" for n, e in err.items())
    report(6, "Bachelier quadrature convergence", ok, detail, time.perf_counter() - t0, 5)


def _random_tick_profile(rng):
    k = int(math.log(3000.0) / math.log(1.0001))
    n = int(rng.integers(1, 12))
    ticks = np.sort(rng.choice(np.arange(k - 8000, k + 4000, 10), size=n + 1, replace=False))
    ell = rng.uniform(0.0, 5.0, n)
    return LiquidityProfile.from_steps([(1.0001 ** int(i), 1.0001 ** int(j), e) for i, j, e in zip(ticks[:-1], ticks[1:], ell)])


def _remainder_reference(prof, conv):
    e_r, e_d = math.exp(-conv.r * conv.T), math.exp(-conv.delta * conv.T)
    total = 0.0
    for lo, hi, ell in prof.steps:
        if lo < conv.P0:
            total += adaptive_integrate(lambda q: ell / (2 * q**1.5) * (q * e_r - conv.P0 * e_d), lo, min(hi, conv.P0), tol=1e-15)
    return total


def test_criterion_07_remainder_and_split_parity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    conv = MarketConventions(F=3000.0, T=0.5, P0=3000.0, r=0.03, delta=0.01)
    worst = 0.0
    for _ in range(100):
        prof = _random_tick_profile(rng)
        want = _remainder_reference(prof, conv)
        got = remainder_sum(prof, conv)
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300) if want else abs(got))
    parity = 0.0
    flat = MarketConventions(F=3000.0, T=0.25, P0=3000.0)
    proxy = bs_proxy(3000.0, 0.25, 0.7, np.arange(1000.0, 6001.0, 25.0))
    for _ in range(10):
        prof = _random_tick_profile(rng)
        lhs = market_il_price(prof, proxy, flat).total
        rhs = all_calls_il_price(prof, proxy.call_curve) + remainder_sum(prof, flat)
        parity = max(parity, abs(lhs - rhs) / abs(lhs))
    ok = worst <= 1e-10 and parity <= 1e-8
    report(7, "tick remainder and split parity", ok, f"remainder {worst:.1e}, parity {parity:.1e}", time.perf_counter() - t0, 10)


def _aligned_strikes(profile, sub):
    edges = np.union1d(np.union1d(profile.lo, profile.hi), [CONV.P0])
    k = np.concatenate([np.linspace(a, b, sub + 1) for a, b in zip(edges[:-1], edges[1:])])
    return np.unique(np.concatenate([k, [1000.0, 6000.0]]))


def _all_sigmas(profile, proxy):
    rows = fine_structure(profile, proxy, CONV, RESOLUTIONS, ("bs",))
    sig = [invert_global(profile, proxy, CONV)] + [r.sigma_bs for r in rows]
    return np.array([np.nan if s is None else s for s in sig]), rows


def test_criterion_08_implied_vol_round_trip(report):
    t0 = time.perf_counter()
    prof = load_liquidity(FIXTURES / "ladder.json")
    coarse_err = aligned_err = homog = additive = 0.0
    for sigma in (0.3, 0.5, 0.9):
        sig, _ = _all_sigmas(prof, bs_proxy(3000, 0.25, sigma, np.arange(1000.0, 6001.0, 25.0)))
        coarse_err = max(coarse_err, np.max(np.abs(sig - sigma)))
        proxy = bs_proxy(3000, 0.25, sigma, _aligned_strikes(prof, 1024))
        sig, rows = _all_sigmas(prof, proxy)
        aligned_err = max(aligned_err, np.max(np.abs(sig - sigma)))
        total = market_il_price(prof, proxy, CONV).total
        for res in map(str, RESOLUTIONS):
            part = sum(r.market_price for r in rows if r.resolution == res)
            additive = max(additive, abs(part / total - 1))
        scaled, _ = _all_sigmas(prof.scaled(7.5), proxy)
        homog = max(homog, np.max(np.abs(scaled / sig - 1)))
    ok = coarse_err <= 1e-3 and aligned_err <= 1e-8 and homog <= 1e-9 and additive <= 1e-10
    detail = f"25-USD {coarse_err:.1e}, aligned {aligned_err:.1e}, homogeneity {homog:.1e}, additivity {additive:.1e}"
    report(8, "implied-vol round trip", bool(ok), detail, time.perf_counter() - t0, 60)


def test_criterion_09_last_passage_example(report):
    t0 = time.perf_counter()
    prof = exponential_profile()
    c1 = optimal_exit(ExitParams(0.02, 0.1, 0.01, 0.02), prof)
    c2 = optimal_exit(ExitParams(0.02, 0.1, 0.03, 0.02), prof)
    c3 = optimal_exit(ExitParams(0.01, 0.1, 0.04, 0.02), prof)
    p = ExitParams(0.02, 0.1, 0.01, 0.02)
    h = 1e-5
    fd = (expected_pnl(0.3 + h, p, prof) - expected_pnl(0.3 - h, p, prof)) / (2 * h)
    fd_err = abs(fd / v_prime(0.3, p, prof) - 1)
    ok1 = c1.kind == "Interior" and abs(c1.epsilon_star - 0.65) <= 0.05
    ok2 = c2.kind == "Interior" and abs(c2.epsilon_star - 0.45) <= 0.05
    ok3 = c3.kind == "Monotone" and c3.supremum == 0.5
    detail = (
        f"case 1 eps*={c1.epsilon_star:.4f} (target 0.65+-0.05), case 2 eps*={c2.epsilon_star:.4f} "
        f"(target 0.45+-0.05), case 3 {c3.kind} {c3.supremum}, v' FD err {fd_err:.1e}"
    )
    report(9, "last-passage exit example", ok1 and ok2 and ok3 and fd_err <= 1e-6, detail, time.perf_counter() - t0, 10)


def test_criterion_10_jensen_and_monotonicity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    conv = MarketConventions(F=1.0, T=0.5, P0=1.0)
    grid = np.linspace(0.05, 2.0, 15)
    violations = checked = 0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        cuts = np.sort(rng.uniform(0.3, 3.0, 2 * n))
        steps = [(a, b, w) for a, b, w in zip(cuts[::2], cuts[1::2], rng.uniform(0.1, 10, n)) if b - a > 1e-3]
        atoms = [(float(rng.uniform(0.3, 3.0)), float(rng.uniform(0.01, 2)))] if rng.random() < 0.5 else []
        prof = LiquidityProfile.from_steps(steps or [(0.5, 2.0, 1.0)], atoms)
        floor = il(prof, 1.0, conv.F).total
        for model in ("bs", "bachelier"):
            prices = np.array([model_il_price(prof, s, conv, model).total for s in grid])
            violations += int(np.sum(prices < floor)) + int(np.sum(np.diff(prices) <= 0))
            checked += 2 * grid.size - 1
    report(10, "Jensen bound and monotonicity in sigma", violations == 0, f"{violations} violations in {checked} checks", time.perf_counter() - t0, 10)


def _pipeline(path):
    snap = load_snapshot(path)
    cleaned, report_ = clean_quotes(snap)
    proxy = build_proxy(synthesize_missing(cleaned, report=report_))
    prof = load_liquidity(FIXTURES / "ladder.json")
    rows = fine_structure(prof, proxy, snap.conv, RESOLUTIONS)
    return bins_to_csv(rows, snap.conv.F) + repr(invert_global(prof, proxy, snap.conv))


def test_criterion_11_pipeline_determinism(report):
    t0 = time.perf_counter()
    paths = [FIXTURES / n for n in ("snapshot.json", "snapshot_convexity.json", "snapshot_sparse.json")]
    serial = [_pipeline(p) for p in paths]
    again = [_pipeline(p) for p in paths]
    with ThreadPoolExecutor(max_workers=3) as pool:
        threaded = list(pool.map(_pipeline, paths))
    idempotent = True
    for p in paths:
        once, _ = clean_quotes(load_snapshot(p))
        twice, rep = clean_quotes(once)
        idempotent &= snapshot_to_dict(once) == snapshot_to_dict(twice) and not rep.dropped
    ok = serial == again == threaded and idempotent
    detail = f"repeat identical={serial == again}, threaded identical={serial == threaded}, idempotent={idempotent}"
    report(11, "pipeline determinism", ok, detail, time.perf_counter() - t0, 5)


def test_criterion_12_rmm_identities(report):
    t0 = time.perf_counter()
    K, v = 2.0, 0.3
    xs = np.linspace(0.01, 0.99, 99)
    cc = covered_call_at_expiry(K)
    exact = max(abs(K * x + curve_from_value(cc, x)[1] - K) for x in xs)
    bs = bs_covered_call(K, v)
    rel = max(abs(ndtri(1 - x) - ndtri(curve_from_value(bs, x)[1] / K) - v) for x in xs)
    ok = exact == 0.0 and rel <= 1e-6
    report(12, "replicating market maker identities", ok, f"Kx+y-K max {exact:.1e}, covered-call err {rel:.1e}", time.perf_counter() - t0, 1)
