"""Price paths, pathwise LVR and the hedging-cost/LVR split of IL.

Along a discretized path ``P_0, ..., P_m``

    LVR_t     = 1/2 sum_{k<t} L(P_k) (P_{k+1} - P_k)^2
    hedging_t = sum_{k<t} (x(p0) - x(P_k)) (P_{k+1} - P_k)

and ``hedging + LVR`` converges to the realized IL as the grid refines.
Quadratic variation uses realized squared increments, so the swap
identities hold pathwise for any model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadInput, UnboundedSupport
from .payoff import il_many
from .profiles import LiquidityProfile, atoms_upto, locate_step, density_at, mass_below
from .quadrature import gauss_legendre

CHUNK = 1024  # paths per simulation batch


@dataclass(frozen=True)
class GBM:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise BadInput("sigma must be >= 0")


@dataclass(frozen=True)
class CEV:
    """Driftless CEV, dP = nu P**beta dW."""

    nu: float
    beta: float

    def __post_init__(self):
        if not self.nu > 0 or self.beta < 0:
            raise BadInput("need nu > 0 and beta >= 0")


@dataclass(frozen=True)
class PathConfig:
    T: float
    steps: int
    paths: int
    seed: int = 0

    def __post_init__(self):
        if not (self.T > 0 and self.steps >= 1 and self.paths >= 1):
            raise BadInput("need T > 0, steps >= 1, paths >= 1")

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.steps + 1)


@dataclass(frozen=True, eq=False)
class SimulatedPaths:
    t: np.ndarray
    paths: np.ndarray  # (paths, steps + 1)
    absorbed: np.ndarray  # bool per path


@dataclass(frozen=True, eq=False)
class ILDecomposition:
    hedging_cost: np.ndarray
    lvr: np.ndarray
    il_direct: np.ndarray

    @property
    def residual(self):
        return self.hedging_cost + self.lvr - self.il_direct


def path_normals(seed, index, steps):
    """Standard normals of path ``index``; independent of batch layout."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss)).standard_normal(steps)


def _normals(config, start, stop):
    return np.stack([path_normals(config.seed, i, config.steps) for i in range(start, stop)])


def _simulate_block(model, config, p0, start, stop):
    z = _normals(config, start, stop)
    dt = config.dt
    if isinstance(model, GBM):
        paths = kernels.gbm_paths(float(p0), (model.mu - 0.5 * model.sigma**2) * dt, model.sigma * math.sqrt(dt), z)
        return paths, np.zeros(stop - start, dtype=bool)
    if isinstance(model, CEV):
        return kernels.cev_paths(float(p0), model.nu, model.beta, dt, z)
    raise BadInput(f"unsupported model {model!r}")


def simulate_paths(model, config, p0):
    """All paths at once: exact log scheme for GBM, absorbed Euler for CEV."""
    if not p0 > 0:
        raise BadInput("p0 must be > 0")
    paths, absorbed = _simulate_block(model, config, p0, 0, config.paths)
    return SimulatedPaths(config.times, paths, absorbed)


def iter_paths(model, config, p0, chunk=CHUNK):
    """Yield ``SimulatedPaths`` batches; identical draws to ``simulate_paths``."""
    for start in range(0, config.paths, chunk):
        stop = min(start + chunk, config.paths)
        paths, absorbed = _simulate_block(model, config, p0, start, stop)
        yield SimulatedPaths(config.times, paths, absorbed)


# densities and reserves along paths -----------------------------------------------
def _density(liq, q):
    q = np.asarray(q, dtype=float)
    if isinstance(liq, LiquidityProfile):
        flat = np.ascontiguousarray(q.ravel())
        out = np.zeros(flat.size)
        pos = flat > 0
        out[pos] = density_at(liq, flat[pos])
        return out.reshape(q.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(q > 0, liq.density(np.where(q > 0, q, 1.0)), 0.0)
    return out


def x_drop(liq, p0, q):
    """``x(p0) - x(q)``, the signed token-X outflow; finite for unbounded families."""
    q = np.asarray(q, dtype=float)
    if isinstance(liq, LiquidityProfile):
        return mass_below(liq, q) - mass_below(liq, p0)
    lo, hi = np.minimum(q, p0), np.maximum(q, p0)
    safe = np.maximum(lo, 1e-300)
    m = np.where(hi > lo, liq.mass(safe, np.where(hi > lo, hi, safe * 2)), 0.0)
    return np.where(q >= p0, m, -m)


def _as_2d(path):
    a = np.asarray(path, dtype=float)
    return (a[None, :], True) if a.ndim == 1 else (a, False)


def lvr_along_path(liq, path):
    """Cumulative LVR along each path (same shape as ``path``).

    ``liq`` is a step profile or an analytic family; atoms are ignored
    (their LVR is a local-time term).
    """
    p, single = _as_2d(path)
    dens = np.ascontiguousarray(_density(liq, p[:, :-1]))
    out = kernels.lvr_cumulative(dens, np.ascontiguousarray(p))
    return out[0] if single else out


def hedging_along_path(liq, path, p0):
    p, single = _as_2d(path)
    dx = np.ascontiguousarray(x_drop(liq, p0, p[:, :-1]))
    out = kernels.hedging_cumulative(dx, np.ascontiguousarray(p))
    return out[0] if single else out


def gamma_swap_leg(path):
    """Cumulative ``sum (dP)^2 / P`` (floating leg of a gamma swap)."""
    p, single = _as_2d(path)
    d = np.diff(p, axis=1)
    out = np.zeros(p.shape)
    np.cumsum(d * d / p[:, :-1], axis=1, out=out[:, 1:])
    return out[0] if single else out


def variance_swap_leg(path):
    """Cumulative ``sum (dP)^2 / P^2`` (floating leg of a variance swap)."""
    p, single = _as_2d(path)
    d = np.diff(p, axis=1)
    out = np.zeros(p.shape)
    np.cumsum(d * d / (p[:, :-1] * p[:, :-1]), axis=1, out=out[:, 1:])
    return out[0] if single else out


def _realized_il(liq, p0, pt):
    if isinstance(liq, LiquidityProfile):
        return il_many(liq, p0, pt)
    # family: IL = int_{p0}^{pt} (pt - q) L dq = pt * x_drop - (y(pt) - y(p0))
    pt = np.asarray(pt, dtype=float)
    y = np.vectorize(lambda p: liq.reserves(p)[1])
    return pt * x_drop(liq, p0, pt) - (y(pt) - liq.reserves(p0)[1])


def decompose_il_path(liq, path, p0):
    """Final hedging cost, LVR and realized IL for each path."""
    p, _ = _as_2d(path)
    if np.any(np.abs(p[:, 0] - p0) > 1e-12 * p0):
        raise BadInput("paths must start at p0")
    hedge = hedging_along_path(liq, p, p0)[:, -1]
    lvr = lvr_along_path(liq, p)[:, -1]
    return ILDecomposition(hedge, lvr, np.asarray(_realized_il(liq, p0, p[:, -1]), dtype=float))


# LVR-neutral check ---------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LVRNeutralResult:
    slope: float
    target: float  # C / 2
    t: np.ndarray
    mean_lvr: np.ndarray
    stderr: np.ndarray
    excluded_fraction: float  # absorbed at zero
    support_exit_fraction: float


def lvr_statistics(model, liq, config, p0, keep=None, chunk=CHUNK):
    """Mean and standard error of cumulative LVR over included paths.

    ``keep(paths, absorbed)`` returns a boolean mask of paths to use.
    Returns ``(mean, stderr, n_used, n_absorbed, n_exit)``.
    """
    s1 = np.zeros(config.steps + 1)
    s2 = np.zeros(config.steps + 1)
    used = absorbed_n = exit_n = 0
    for batch in iter_paths(model, config, p0, chunk):
        mask = ~batch.absorbed
        absorbed_n += int(batch.absorbed.sum())
        if keep is not None:
            inside = keep(batch.paths)
            exit_n += int((mask & ~inside).sum())
            mask &= inside
        if not np.any(mask):
            continue
        lvr = lvr_along_path(liq, batch.paths[mask])
        s1 += lvr.sum(axis=0)
        s2 += (lvr * lvr).sum(axis=0)
        used += int(mask.sum())
    if used == 0:
        raise BadInput("no paths left after exclusions")
    mean = s1 / used
    var = np.maximum(s2 / used - mean * mean, 0.0) * used / max(used - 1, 1)
    return mean, np.sqrt(var / used), used, absorbed_n, exit_n


def fit_slope(t, y):
    """Least-squares slope of ``y`` against ``t`` (with intercept)."""
    return float(np.polyfit(np.asarray(t, dtype=float), np.asarray(y, dtype=float), 1)[0])


def lvr_neutral_check(family, config, p0):
    """Monte Carlo slope of mean LVR under the family's own CEV dynamics.

    Paths absorbed at zero and paths that leave the family's support are
    excluded; both fractions are reported.
    """
    lo, hi = family.support()
    if not lo <= p0 <= hi:
        raise BadInput("p0 outside the family support")
    model = CEV(family.nu, family.beta)

    def keep(paths):
        return np.all((paths >= lo) & (paths <= hi), axis=1)

    mean, se, used, n_abs, n_exit = lvr_statistics(model, family, config, p0, keep)
    t = config.times
    n = config.paths
    return LVRNeutralResult(fit_slope(t, mean), 0.5 * family.C, t, mean, se, n_abs / n, n_exit / n)


# LVR price -----------------------------------------------------------------------
def psi(profile, P):
    """Second antiderivative of L: ``Psi(P) = int L(q) (P - q)^+ dq``.

    On a step ``[a, b)`` this is 0 below ``a``, ``ell (sqrt P - sqrt a)^2 / sqrt a``
    inside (i.e. ``-2 ell sqrt P`` plus an affine term) and affine above, so
    it is C^1 across every breakpoint.
    """
    profile.check_bounded()
    P = np.asarray(P, dtype=float)
    out = np.zeros(P.shape)
    if profile.lo.size:
        a, b, ell = profile.lo, profile.hi, profile.ell
        w = ell * (np.sqrt(b) - np.sqrt(a))
        slope = np.concatenate([[0.0], np.cumsum(w / np.sqrt(a * b))])
        shift = np.concatenate([[0.0], np.cumsum(w)])
        jc, inside = locate_step(profile, P)
        below = np.searchsorted(b, P, side="right")
        sa = np.sqrt(a[jc])
        part = np.where(inside, ell[jc] * (np.sqrt(np.where(inside, P, 1.0)) - sa) ** 2 / sa, 0.0)
        out += P * slope[below] - shift[below] + part
    if profile.atom_q.size:
        out += P * atoms_upto(profile, P, profile.atom_mass) - atoms_upto(profile, P, profile.atom_q * profile.atom_mass)
    return out


def psi_prime(profile, P):
    """``Psi'(P) = int_0^P L``."""
    return mass_below(profile, P)


def lvr_price(profile, sigma, p0, T, n=32, width=12.0):
    """Expected LVR to ``T`` under driftless GBM: ``E[Psi(P_T)] - Psi(p0)``.

    The expectation is taken in the standard-normal coordinate ``z`` of
    ``P_T = p0 exp(s z - s^2/2)``, ``s = sigma sqrt(T)``, by Gauss-Legendre
    on unit panels split at every breakpoint and truncated ``width``
    standard deviations out (shifted by ``s`` on the upper side). The linear part of Psi has zero mean and
    is removed first.
    """
    if not (p0 > 0 and T >= 0 and sigma >= 0):
        raise BadInput("need p0 > 0, T >= 0, sigma >= 0")
    if np.any(np.isinf(profile.hi) & (profile.ell > 0)):
        raise UnboundedSupport("LVR price needs bounded step support")
    s = sigma * math.sqrt(T)
    if s == 0 or profile.is_empty:
        return 0.0
    psi0 = float(psi(profile, p0))
    d0 = float(psi_prime(profile, p0))

    def z_of(q):
        return (np.log(q / p0) + 0.5 * s * s) / s

    knots = np.concatenate([profile.lo, profile.hi, profile.atom_q])
    zk = z_of(knots[np.isfinite(knots) & (knots > 0)])
    top = width + s  # the lognormal tail is shifted up by s
    zk = zk[(zk > -width) & (zk < top)]
    edges = np.unique(np.concatenate([[-width, top], zk, np.arange(-width, top, 1.0)]))
    x, w = gauss_legendre(n)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    z = half[:, None] * x + (0.5 * (hi + lo))[:, None]
    P = p0 * np.exp(s * z - 0.5 * s * s)
    g = psi(profile, P) - psi0 - d0 * (P - p0)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return float(np.sum(half * np.sum(g * phi * w, axis=-1)))
