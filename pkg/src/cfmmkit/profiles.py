"""Liquidity profiles in price/intrinsic-liquidity coordinates.

A profile is a piecewise-constant intrinsic liquidity ``ell`` on disjoint,
lower-closed price intervals ``[lo, hi)`` plus optional point atoms. The
density over price is ``L(q) = ell / (2 q**1.5)``; an atom ``(q0, mass)`` puts
``mass`` units of token X at the single price ``q0``.

All step integrals use the closed forms

    int_a^b ell/(2 q^1.5) dq = ell (1/sqrt(a) - 1/sqrt(b))
    int_a^b ell/(2 q^0.5) dq = ell (sqrt(b) - sqrt(a))
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DegenerateCurvature,
    EmptyLadder,
    InputError,
    NegativeLiquidity,
    NonPositivePrice,
    SchemaError,
    UnboundedSupport,
)

TICK_BASE = 1.0001
MIN_TICK = -887272
MAX_TICK = 887272


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LiquidityProfile:
    """Piecewise-constant ``ell`` over sorted disjoint ``[lo, hi)`` plus atoms."""

    lo: np.ndarray
    hi: np.ndarray
    ell: np.ndarray
    atom_q: np.ndarray
    atom_mass: np.ndarray

    def __post_init__(self):
        for name in ("lo", "hi", "ell", "atom_q", "atom_mass"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        lo, hi, ell = self.lo, self.hi, self.ell
        if not (lo.shape == hi.shape == ell.shape) or lo.ndim != 1:
            raise InputError("lo, hi, ell must be 1-D arrays of equal length")
        if self.atom_q.shape != self.atom_mass.shape:
            raise InputError("atom_q and atom_mass must have equal length")
        if lo.size:
            if not np.all(np.isfinite(lo)) or np.any(lo <= 0):
                raise NonPositivePrice("step lower bounds must be finite and > 0")
            if np.any(np.isnan(hi)) or np.any(hi <= lo):
                raise InputError("every step needs lo < hi")
            if np.any(hi[:-1] > lo[1:]):
                raise InputError("steps must be sorted and pairwise disjoint")
            if not np.all(np.isfinite(ell)) or np.any(ell < 0):
                raise InputError("ell must be finite and >= 0")
        if self.atom_q.size:
            if np.any(self.atom_q <= 0) or not np.all(np.isfinite(self.atom_q)):
                raise NonPositivePrice("atom prices must be finite and > 0")
            if np.any(np.diff(self.atom_q) < 0):
                raise InputError("atoms must be sorted by price")
            if np.any(self.atom_mass <= 0):
                raise InputError("atom masses must be > 0")

    # construction -------------------------------------------------------
    @classmethod
    def from_steps(cls, steps=(), atoms=()):
        steps = sorted((float(a), float(b), float(c)) for a, b, c in steps)
        atoms = sorted((float(q), float(m)) for q, m in atoms)
        return cls(
            np.array([s[0] for s in steps]),
            np.array([s[1] for s in steps]),
            np.array([s[2] for s in steps]),
            np.array([a[0] for a in atoms]),
            np.array([a[1] for a in atoms]),
        )

    @classmethod
    def empty(cls):
        return cls.from_steps()

    @classmethod
    def range(cls, ell, pa, pb):
        """Concentrated position: constant ``ell`` on ``[pa, pb)``."""
        return cls.from_steps([(pa, pb, ell)])

    # views --------------------------------------------------------------
    @property
    def steps(self):
        return list(zip(self.lo.tolist(), self.hi.tolist(), self.ell.tolist()))

    @property
    def atoms(self):
        return list(zip(self.atom_q.tolist(), self.atom_mass.tolist()))

    @property
    def is_empty(self):
        return not (np.any(self.ell > 0) or self.atom_q.size)

    def support(self):
        """(min, max) price carrying liquidity, or None for an empty profile."""
        pts = []
        live = self.ell > 0
        if np.any(live):
            pts += [self.lo[live].min(), self.hi[live].max()]
        if self.atom_q.size:
            pts += [self.atom_q.min(), self.atom_q.max()]
        return (min(pts), max(pts)) if pts else None

    def step_mass(self):
        """Token-X measure of each step, ``int L`` over the step."""
        with np.errstate(divide="ignore"):
            return self.ell * (1.0 / np.sqrt(self.lo) - 1.0 / np.sqrt(self.hi))

    def scaled(self, c):
        if c < 0:
            raise InputError("scale must be >= 0")
        return LiquidityProfile(self.lo, self.hi, self.ell * c, self.atom_q, self.atom_mass * c)

    def restricted(self, a, b):
        """Profile multiplied by the indicator of ``[a, b)``."""
        lo = np.maximum(self.lo, a)
        hi = np.minimum(self.hi, b)
        keep = lo < hi
        aq = (self.atom_q >= a) & (self.atom_q < b)
        return LiquidityProfile(lo[keep], hi[keep], self.ell[keep], self.atom_q[aq], self.atom_mass[aq])

    def check_bounded(self):
        if np.any(np.isinf(self.hi) & (self.ell > 0)):
            raise UnboundedSupport("a step with ell > 0 extends to +inf; use a closed-form family for unbounded support")


def combine(*profiles, weights=None):
    """Nonnegative linear combination; overlapping steps add their ``ell``."""
    if weights is None:
        weights = [1.0] * len(profiles)
    if any(w < 0 for w in weights):
        raise InputError("weights must be >= 0")
    edges = np.unique(np.concatenate([np.concatenate([p.lo, p.hi]) for p in profiles] + [np.empty(0)]))
    lo, hi = edges[:-1], edges[1:]
    ell = np.zeros(lo.size)
    if lo.size:
        mid = np.where(np.isinf(hi), lo * 2.0, 0.5 * (lo + hi))
        for p, w in zip(profiles, weights):
            ell += w * step_ell_at(p, mid)
    keep = ell > 0
    aq = np.concatenate([p.atom_q for p in profiles] + [np.empty(0)])
    am = np.concatenate([p.atom_mass * w for p, w in zip(profiles, weights)] + [np.empty(0)])
    uq, inv = np.unique(aq, return_inverse=True)
    um = np.zeros(uq.size)
    np.add.at(um, inv, am)
    keepa = um > 0
    return LiquidityProfile(lo[keep], hi[keep], ell[keep], uq[keepa], um[keepa])


def step_ell_at(profile, q):
    """Intrinsic liquidity ``ell`` of the step covering each ``q`` (0 outside)."""
    q = np.asarray(q, dtype=float)
    out = np.zeros(q.shape)
    if profile.lo.size == 0:
        return out
    j = np.searchsorted(profile.lo, q, side="right") - 1
    jc = np.clip(j, 0, profile.lo.size - 1)
    inside = (j >= 0) & (q < profile.hi[jc])
    out[inside] = profile.ell[jc[inside]]
    return out


@dataclass(frozen=True)
class ReservePoint:
    x: float
    y: float
    p: float


@dataclass(frozen=True)
class TickLadder:
    """Initialized ticks with signed ``liquidity_net`` deltas and the pool state."""

    ticks: tuple  # ((tick_index, liquidity_net), ...)
    current_tick: int
    current_liquidity: float
    decimal_scale: float = 1.0
    pool_price: float | None = None

    def __post_init__(self):
        ticks = tuple((int(t), float(n)) for t, n in self.ticks)
        object.__setattr__(self, "ticks", ticks)
        idx = [t for t, _ in ticks]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InputError("tick indices must be strictly increasing")
        if self.current_liquidity < 0:
            raise NegativeLiquidity(self.current_tick, self.current_liquidity)
        if not self.decimal_scale > 0:
            raise InputError("decimal_scale must be > 0")

    def tick_price(self, i):
        return self.decimal_scale * TICK_BASE ** np.asarray(i, dtype=float)


def anchored_liquidity(ladder):
    """Per-interval ``ell`` from the anchored cumulative sum of ``liquidity_net``.

    Returns ``(edges, ell)`` where ``edges`` has one more entry than ``ell``.
    Interval ``j`` is ``[edges[j], edges[j+1])`` in tick units. The outer
    intervals run to MIN_TICK / MAX_TICK.
    """
    if not ladder.ticks:
        raise EmptyLadder("tick ladder has no initialized ticks")
    idx = np.array([t for t, _ in ladder.ticks], dtype=np.int64)
    net = np.array([n for _, n in ladder.ticks], dtype=float)
    edges = np.concatenate([[min(MIN_TICK, idx[0])], idx, [max(MAX_TICK, idx[-1])]])
    cum = np.concatenate([[0.0], np.cumsum(net)])
    # interval j+1 is [idx[j], idx[j+1]); interval 0 lies below the first tick
    j = int(np.searchsorted(idx, ladder.current_tick, side="right"))
    ell = cum + (ladder.current_liquidity - cum[j])
    ell[j] = ladder.current_liquidity
    # exact zeros where the anchored sum cancels to within rounding
    scale = max(ladder.current_liquidity, float(np.max(np.abs(cum))), 1.0)
    ell[np.abs(ell) <= 1e-12 * scale] = 0.0
    bad = np.nonzero(ell < 0)[0]
    if bad.size:
        k = int(bad[0])
        raise NegativeLiquidity(int(edges[k]), float(ell[k]))
    return edges, ell


def profile_from_ticks(ladder):
    """Step profile implied by a tick ladder, prices in quote units.

    Interior intervals between initialized ticks are kept even when their
    ``ell`` is zero, so each one is a bucket for the fine-structure
    analysis. The two outer intervals only appear when anchoring leaves them
    with nonzero liquidity.
    """
    edges, ell = anchored_liquidity(ladder)
    prices = ladder.tick_price(edges)
    lo, hi = prices[:-1], prices[1:]
    keep = np.ones(ell.size, dtype=bool)
    keep[0] = ell[0] > 0
    keep[-1] = ell[-1] > 0
    return LiquidityProfile(lo[keep], hi[keep], ell[keep], np.empty(0), np.empty(0))


def intrinsic_liquidity_from_partials(fx, fy, fxx, fxy, fyy):
    """Curvature-based intrinsic liquidity of a bonding curve at one point."""
    if not (fx > 0 and fy > 0):
        raise InputError("fx and fy must be > 0")
    den = fyy * fx * fx - 2.0 * fxy * fx * fy + fxx * fy * fy
    if den == 0:
        raise DegenerateCurvature("curvature denominator vanishes")
    return -2.0 * (fx * fy) ** 1.5 / den


def density_at(profile, q):
    """Step part of ``L(q)``; atoms are not included."""
    if np.any(np.asarray(q) <= 0):
        raise NonPositivePrice("q must be > 0")
    scalar = np.ndim(q) == 0
    qa = np.atleast_1d(np.asarray(q, dtype=np.float64))
    out = kernels.step_density(np.ascontiguousarray(qa), profile.lo, profile.hi, profile.ell)
    return float(out[0]) if scalar else out


def locate_step(profile, q):
    """Index of the step holding each ``q`` and whether it is inside one."""
    n = profile.lo.size
    j = np.searchsorted(profile.lo, q, side="right") - 1
    jc = np.clip(j, 0, max(n - 1, 0))
    if n == 0:
        return jc, np.zeros(np.shape(q), dtype=bool)
    return jc, (j >= 0) & (q < profile.hi[jc])


def atoms_upto(profile, q, weights):
    """Sum of ``weights`` over atoms at or below ``q``."""
    if not profile.atom_q.size:
        return np.zeros(np.shape(q))
    c = np.concatenate([[0.0], np.cumsum(weights)])
    return c[np.searchsorted(profile.atom_q, q, side="right")]


def mass_below(profile, q):
    """``int_0^q L`` over the steps plus atoms at or below ``q``.

    Finite for any profile, including steps that run to infinity.
    """
    q = np.asarray(q, dtype=float)
    out = atoms_upto(profile, q, profile.atom_mass)
    if profile.lo.size:
        full = np.concatenate([[0.0], np.cumsum(profile.step_mass())])
        jc, inside = locate_step(profile, q)
        qs = np.where(inside, q, profile.lo[jc])
        part = np.where(inside, profile.ell[jc] * (1.0 / np.sqrt(profile.lo[jc]) - 1.0 / np.sqrt(qs)), 0.0)
        out = out + full[np.searchsorted(profile.hi, q, side="right")] + part
    return out


def x_reserve(profile, p):
    """Token-X reserve ``int_p^inf L`` (vectorised over ``p``)."""
    profile.check_bounded()
    p = np.asarray(p, dtype=float)
    x = np.zeros(p.shape)
    if profile.lo.size:
        # suffix sums keep x accurate when it is small
        suffix = np.concatenate([np.cumsum(profile.step_mass()[::-1])[::-1], [0.0]])
        jc, inside = locate_step(profile, p)
        ps = np.where(inside, p, profile.lo[jc])
        part = np.where(inside, profile.ell[jc] * (1.0 / np.sqrt(ps) - 1.0 / np.sqrt(profile.hi[jc])), 0.0)
        x = suffix[np.searchsorted(profile.lo, p, side="right")] + part
    if profile.atom_q.size:
        x = x + float(profile.atom_mass.sum()) - atoms_upto(profile, p, profile.atom_mass)
    return x


def y_below(profile, q):
    """``int_0^q q' L(q') dq'`` plus atoms at or below ``q``; finite for any profile."""
    q = np.asarray(q, dtype=float)
    y = atoms_upto(profile, q, profile.atom_q * profile.atom_mass)
    if profile.lo.size:
        with np.errstate(invalid="ignore"):
            full = np.concatenate([[0.0], np.cumsum(profile.ell * (np.sqrt(profile.hi) - np.sqrt(profile.lo)))])
        jc, inside = locate_step(profile, q)
        qs = np.where(inside, q, profile.lo[jc])
        part = np.where(inside, profile.ell[jc] * (np.sqrt(qs) - np.sqrt(profile.lo[jc])), 0.0)
        y = y + full[np.searchsorted(profile.hi, q, side="right")] + part
    return y


def y_reserve(profile, p):
    """Token-Y reserve ``int_0^p q L`` (vectorised over ``p``); atoms at p count."""
    profile.check_bounded()
    return y_below(profile, p)


def reserves(profile, p):
    if not p > 0:
        raise NonPositivePrice("p must be > 0")
    return ReservePoint(float(x_reserve(profile, p)), float(y_reserve(profile, p)), float(p))


def pool_value(profile, p):
    """Mark-to-market value ``int min(p, q) L(q) dq`` in token-Y units."""
    if not p > 0:
        raise NonPositivePrice("p must be > 0")
    profile.check_bounded()
    lo, hi, ell = profile.lo, profile.hi, profile.ell
    below = hi <= p
    above = lo >= p
    mid = ~(below | above)
    v = np.zeros(lo.size)
    v[below] = ell[below] * (np.sqrt(hi[below]) - np.sqrt(lo[below]))
    v[above] = p * ell[above] * (1.0 / np.sqrt(lo[above]) - 1.0 / np.sqrt(hi[above]))
    v[mid] = ell[mid] * (2.0 * math.sqrt(p) - np.sqrt(lo[mid]) - p / np.sqrt(hi[mid]))
    total = float(v.sum())
    if profile.atom_q.size:
        total += float(np.sum(np.minimum(p, profile.atom_q) * profile.atom_mass))
    return total


# file I/O -------------------------------------------------------------------
def ladder_from_dict(d):
    try:
        ticks = tuple((int(t["tick"]), int(str(t["liquidityNet"]))) for t in d["ticks"])
        return TickLadder(
            ticks=ticks,
            current_tick=int(d["currentTick"]),
            current_liquidity=float(int(str(d["currentLiquidity"]))),
            decimal_scale=float(d.get("decimalScale", 1.0)),
            pool_price=None if d.get("poolPrice") is None else float(d["poolPrice"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise SchemaError(f"bad tick-ladder document: {exc}") from exc


def ladder_to_dict(ladder):
    return {
        "ticks": [{"tick": t, "liquidityNet": str(int(round(n)))} for t, n in ladder.ticks],
        "currentTick": ladder.current_tick,
        "currentLiquidity": str(int(round(ladder.current_liquidity))),
        "decimalScale": ladder.decimal_scale,
        "poolPrice": ladder.pool_price,
    }


def load_ladder(path):
    with open(Path(path)) as fh:
        return ladder_from_dict(json.load(fh))
