"""Closed-form bonding-curve families and the replicating-market-maker map.

Each family knows its density ``L(q)``, its support, the closed-form mass
``int_a^b L`` and its reserves ``x(p), y(p)``. ``discretize`` turns a family
into a step profile that keeps the mass of every cell.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NonPositivePrice, NotInvertible, OutsideSupport
from .profiles import LiquidityProfile, ReservePoint
from .quadrature import adaptive_integrate, gl_integrate


@dataclass(frozen=True)
class CPMM:
    """sqrt(x y) = K."""

    K: float = 1.0

    def __post_init__(self):
        _positive(K=self.K)

    def support(self):
        return 0.0, math.inf

    def density(self, q):
        return self.K / (2.0 * np.asarray(q, dtype=float) ** 1.5)

    def mass(self, a, b):
        return self.K * (1.0 / np.sqrt(a) - 1.0 / np.sqrt(b))

    def reserves(self, p):
        return self.K / math.sqrt(p), self.K * math.sqrt(p)


@dataclass(frozen=True)
class G3M:
    """x**alpha * y**(1-alpha) = K, with price p = alpha y / ((1-alpha) x)."""

    alpha: float
    K: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)")
        _positive(K=self.K)

    def support(self):
        return 0.0, math.inf

    def _c(self):
        return (1.0 - self.alpha) / self.alpha

    def density(self, q):
        a = self.alpha
        q = np.asarray(q, dtype=float)
        ell = 2.0 * math.sqrt(a * (1 - a)) * self.K * (self._c() * q) ** (a - 0.5)
        return ell / (2.0 * q**1.5)

    def reserves(self, p):
        cp = self._c() * p
        return self.K * cp ** (self.alpha - 1.0), self.K * cp**self.alpha

    def mass(self, a, b):
        c = self._c()
        return self.K * ((c * np.asarray(a)) ** (self.alpha - 1) - (c * np.asarray(b)) ** (self.alpha - 1))


@dataclass(frozen=True)
class EntropyY:
    """x + ln y = ln C: density 1/q on (0, C]."""

    C: float = math.e

    def __post_init__(self):
        _positive(C=self.C)

    def support(self):
        return 0.0, self.C

    def density(self, q):
        q = np.asarray(q, dtype=float)
        return np.where(q <= self.C, 1.0 / q, 0.0)

    def mass(self, a, b):
        b = np.minimum(b, self.C)
        return np.where(b > a, np.log(b / np.asarray(a, dtype=float)), 0.0)

    def reserves(self, p):
        return max(math.log(self.C) - math.log(p), 0.0), min(p, self.C)


@dataclass(frozen=True)
class EntropyX:
    """ln x + y = K: density 1/q**2 on [exp(-K), inf), where y(p) = K + ln p >= 0."""

    K: float = 10.0

    def support(self):
        return math.exp(-self.K), math.inf

    def density(self, q):
        q = np.asarray(q, dtype=float)
        return np.where(q >= math.exp(-self.K), 1.0 / (q * q), 0.0)

    def mass(self, a, b):
        a = np.maximum(a, math.exp(-self.K))
        return np.where(b > a, 1.0 / a - 1.0 / np.asarray(b, dtype=float), 0.0)

    def reserves(self, p):
        if p < math.exp(-self.K):
            return math.exp(self.K), 0.0
        return 1.0 / p, self.K + math.log(p)


@dataclass(frozen=True)
class CEVNeutral:
    """LVR-neutral profile for dP = nu P**beta dW: L(q) = C / (nu**2 q**(2 beta)).

    The cutoffs enter only where the untruncated integrals diverge: ``M`` caps
    the support from above when beta <= 1/2 and ``eps`` from below when
    beta >= 1.
    """

    C: float
    nu: float
    beta: float
    eps: float = 1e-6
    M: float = 1e6

    def __post_init__(self):
        if self.C < 0:
            raise InputError("C must be >= 0")
        _positive(nu=self.nu, eps=self.eps, M=self.M)
        if self.beta < 0:
            raise InputError("beta must be >= 0")
        if not self.eps < self.M:
            raise InputError("need eps < M")

    def support(self):
        lo = self.eps if self.beta >= 1 else 0.0
        hi = self.M if self.beta <= 0.5 else math.inf
        return lo, hi

    def density(self, q):
        q = np.asarray(q, dtype=float)
        lo, hi = self.support()
        val = self.C / (self.nu**2 * q ** (2.0 * self.beta))
        return np.where((q >= lo) & (q <= hi), val, 0.0)

    def mass(self, a, b):
        lo, hi = self.support()
        a = np.maximum(np.asarray(a, dtype=float), lo)
        b = np.minimum(np.asarray(b, dtype=float), hi)
        k = self.C / self.nu**2
        e = 1.0 - 2.0 * self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            val = k * np.log(b / a) if e == 0 else k * (b**e - a**e) / e
        return np.where(b > a, val, 0.0)

    def reserves(self, p):
        r = cev_neutral_reserves(self, p)
        return r.x, r.y


@dataclass(frozen=True)
class Range:
    """Concentrated position: constant ``ell`` on [pa, pb]."""

    ell: float
    pa: float
    pb: float

    def __post_init__(self):
        _positive(ell=self.ell, pa=self.pa)
        if not self.pa < self.pb:
            raise InputError("need 0 < pa < pb")

    def support(self):
        return self.pa, self.pb

    def density(self, q):
        q = np.asarray(q, dtype=float)
        return np.where((q >= self.pa) & (q <= self.pb), self.ell / (2.0 * q**1.5), 0.0)

    def mass(self, a, b):
        a = np.maximum(a, self.pa)
        b = np.minimum(b, self.pb)
        return np.where(b > a, self.ell * (1.0 / np.sqrt(a) - 1.0 / np.sqrt(b)), 0.0)

    def reserves(self, p):
        a, b = self.pa, self.pb
        if p <= a:
            return self.ell * (1 / math.sqrt(a) - 1 / math.sqrt(b)), 0.0
        if p >= b:
            return 0.0, self.ell * (math.sqrt(b) - math.sqrt(a))
        return self.ell * (1 / math.sqrt(p) - 1 / math.sqrt(b)), self.ell * (math.sqrt(p) - math.sqrt(a))


FAMILIES = {
    "cpmm": CPMM,
    "g3m": G3M,
    "entropy_y": EntropyY,
    "entropy_x": EntropyX,
    "cev_neutral": CEVNeutral,
    "range": Range,
}


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise InputError(f"{k} must be > 0, got {v!r}")


def family_from_dict(d):
    d = dict(d)
    try:
        cls = FAMILIES[d.pop("family")]
    except KeyError as exc:
        raise InputError(f"unknown or missing family: {exc}") from None
    try:
        return cls(**d)
    except TypeError as exc:
        raise InputError(f"bad parameters for {cls.__name__}: {exc}") from None


def family_to_dict(fam):
    name = next(k for k, v in FAMILIES.items() if isinstance(fam, v))
    return {"family": name, **asdict(fam)}


def analytic_density(family, q):
    if np.any(np.asarray(q) <= 0):
        raise NonPositivePrice("q must be > 0")
    out = family.density(q)
    return float(out) if np.ndim(out) == 0 else out


def family_reserves(family, p):
    if not p > 0:
        raise NonPositivePrice("p must be > 0")
    x, y = family.reserves(p)
    return ReservePoint(float(x), float(y), float(p))


def discretize(family, breakpoints):
    """Step profile whose per-cell ``int L`` matches the family exactly."""
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2:
        raise InputError("need at least two breakpoints")
    if np.any(bp <= 0) or np.any(np.diff(bp) <= 0):
        raise InputError("breakpoints must be positive and strictly increasing")
    lo_s, hi_s = family.support()
    if bp[0] < lo_s * (1 - 1e-12) or bp[-1] > hi_s * (1 + 1e-12):
        raise OutsideSupport(f"breakpoints [{bp[0]}, {bp[-1]}] leave the support [{lo_s}, {hi_s}]")
    a, b = bp[:-1], bp[1:]
    mass = np.asarray(family.mass(a, b), dtype=float)
    ell = mass / (1.0 / np.sqrt(a) - 1.0 / np.sqrt(b))
    return LiquidityProfile(a, b, np.maximum(ell, 0.0), np.empty(0), np.empty(0))


def discretize_density(density, breakpoints, n=16):
    """Mass-preserving step profile for an arbitrary density callable ``L(q)``.

    Cell masses come from n-point Gauss-Legendre, so the density should be
    smooth inside each cell.
    """
    bp = np.asarray(breakpoints, dtype=float)
    a, b = bp[:-1], bp[1:]
    mass = gl_integrate(density, a, b, n)
    ell = mass / (1.0 / np.sqrt(a) - 1.0 / np.sqrt(b))
    return LiquidityProfile(a, b, np.maximum(ell, 0.0), np.empty(0), np.empty(0))


def cev_neutral_reserves(family, p):
    """Branch-wise closed-form reserves of the LVR-neutral CEV profile."""
    lo, hi = family.support()
    if not (p > 0 and (p >= family.eps) and p <= family.M):
        raise OutsideSupport(f"p={p} outside [{family.eps}, {family.M}]")
    k = family.C / family.nu**2
    beta = family.beta
    eps, M = family.eps, family.M
    if beta > 0.5:
        x = k * p ** (1 - 2 * beta) / (2 * beta - 1)
    elif beta == 0.5:
        x = k * (math.log(M) - math.log(p))
    else:
        x = k * (M ** (1 - 2 * beta) - p ** (1 - 2 * beta)) / (1 - 2 * beta)
    if beta < 1:
        y = k * p ** (2 * (1 - beta)) / (2 * (1 - beta))
    elif beta == 1:
        y = k * (math.log(p) - math.log(eps))
    else:
        y = k * (eps ** (2 - 2 * beta) - p ** (2 - 2 * beta)) / (2 * (beta - 1))
    return ReservePoint(float(x), float(y), float(p))


# replicating market makers --------------------------------------------------
@dataclass(frozen=True)
class ValueFunctionSpec:
    """Target portfolio value ``V`` with derivatives.

    ``d2V`` is the absolutely continuous part of ``V''``. A kink in ``V``
    (a jump of ``dV``) is given as an atom ``(q0, mass)`` with
    ``mass = dV(q0-) - dV(q0+)``, mirroring profile atoms.
    """

    V: Callable[[float], float]
    dV: Callable[[float], float]
    d2V: Callable
    atoms: Sequence = ()


def covered_call_at_expiry(K):
    """V(p) = min(p, K): all liquidity sits at one price."""
    return ValueFunctionSpec(
        V=lambda p: min(p, K),
        dV=lambda p: 1.0 if p < K else 0.0,
        d2V=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
        atoms=((K, 1.0),),
    )


def bs_covered_call(K, v):
    """Black-Scholes covered call with total volatility ``v`` = sigma sqrt(T)."""
    from scipy.special import ndtr

    def d1(p):
        return np.log(np.asarray(p, dtype=float) / K) / v + 0.5 * v

    def V(p):
        return float(p - p * ndtr(d1(p)) + K * ndtr(d1(p) - v))

    def dV(p):
        return float(1.0 - ndtr(d1(p)))

    def d2V(q):
        q = np.asarray(q, dtype=float)
        return -np.exp(-0.5 * d1(q) ** 2) / (math.sqrt(2 * math.pi) * q * v)

    return ValueFunctionSpec(V, dV, d2V)


def curve_from_value(spec, x, tol=1e-10):
    """Reserve pair ``(p, y)`` on the replicating curve for token-X amount ``x``.

    ``p`` is the generalized inverse ``inf{p : dV(p) <= x}`` found by
    bisection in log-price; ``y = -int_0^p q V''(q) dq`` by adaptive
    quadrature, plus atoms below ``p`` and the consumed part of an atom at
    ``p``.
    """
    lo, hi = 1e-8, 1.0
    while spec.dV(lo) <= x and lo > 1e-300:
        lo *= 1e-4
    while spec.dV(hi) > x and hi < 1e300:
        hi *= 4.0
    d_lo, d_hi = spec.dV(lo), spec.dV(hi)
    if d_hi > x or x > d_lo:
        raise NotInvertible(f"x={x} outside the range of dV on [{lo}, {hi}]")
    if d_lo <= x:
        p = lo
    else:
        for _ in range(400):
            mid = math.sqrt(lo * hi)
            if spec.dV(mid) <= x:
                hi = mid
            else:
                lo = mid
            if hi / lo - 1.0 < 1e-15:
                break
        p = hi

    def integrand(q):
        return -q * spec.d2V(q)

    y = adaptive_integrate(integrand, 0.0, p, tol=tol)
    for q0, m in spec.atoms:
        if abs(q0 - p) <= 1e-12 * q0:
            # partially consumed atom: remaining X beyond the atom is dV(p+)
            remaining = x - spec.dV(p * (1 + 1e-12))
            y += q0 * min(max(m - remaining, 0.0), m)
        elif q0 < p:
            y += q0 * m
    return p, y
