"""Implied volatility of an IL price, globally and per price bin.

The model IL price is strictly increasing in volatility, so each inversion
is a plain bisection. Bachelier volatilities are reported normalized by the
pool price, ``sigma_n / P0``, so they sit on the same scale as
Black-Scholes ones.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadInput, BelowIntrinsic, CoverageGap, NoBracket
from .pricing import market_il_price, model_il_pricer

SIGMA_MIN = 1e-6
SIGMA_START = 5.0
SIGMA_CAP = 512.0
PRICE_RTOL = 1e-10
MAX_ITER = 200
MODEL_NAMES = ("bs", "bachelier")
STATUSES = ("ok", "empty_bin", "below_intrinsic", "no_coverage")


def bisect_increasing(f, target, lo=SIGMA_MIN, start=SIGMA_START, cap=SIGMA_CAP, rtol=PRICE_RTOL, max_iter=MAX_ITER, trace=None):
    """Solve ``f(s) = target`` for increasing ``f`` on ``[lo, cap]``.

    The bracket is ``[lo, hi]``; the upper end doubles from ``start`` until
    ``f`` exceeds the target. A root below ``lo`` comes back as ``lo``.
    ``trace``, if a list, receives the bracket ``(lo, hi)`` of each step.
    """
    f0 = f(0.0)
    if not target > 0 or target < f0:
        raise BelowIntrinsic(f"target {target!r} is below the zero-volatility price {f0!r}")
    hi = start
    while f(hi) < target:
        if hi >= cap:
            raise NoBracket(f"model price stays below {target!r} up to sigma={cap}")
        hi = min(2.0 * hi, cap)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if trace is not None:
            trace.append((lo, hi))
        val = f(mid)
        if abs(val - target) <= rtol * target:
            break
        if val < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return mid


def _pricer(profile, conv, model):
    if model == "bs":
        return model_il_pricer(profile, conv, "bs")
    if model == "bachelier":
        price = model_il_pricer(profile, conv, "bachelier")
        return lambda s: price(s * conv.P0)
    raise BadInput(f"unknown model {model!r}")


def invert_price(profile, market_price, conv, model="bs", trace=None):
    """Volatility at which the model IL price of ``profile`` equals ``market_price``.

    Black-Scholes sigma, or ``sigma_n / P0`` for Bachelier.
    """
    return bisect_increasing(_pricer(profile, conv, model), market_price, trace=trace)


def invert_global(profile, proxy, conv, model="bs"):
    """Single implied volatility matching the whole-profile market IL price."""
    if profile.is_empty:
        raise BadInput("profile carries no liquidity")
    return invert_price(profile, market_il_price(profile, proxy, conv).total, conv, model)


# fine structure --------------------------------------------------------------
@dataclass(frozen=True)
class BinResult:
    resolution: str
    index: int
    lo: float
    hi: float
    market_price: float | None
    sigma_bs: float | None
    sigma_b_norm: float | None
    status: str
    status_bs: str = ""
    status_bachelier: str = ""


def parse_resolutions(text):
    """``"1,3,finest"`` -> ``[1, 3, "finest"]``."""
    out = []
    for tok in str(text).split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok == "finest":
            out.append("finest")
        else:
            n = int(tok)
            if n < 1:
                raise BadInput("resolutions must be >= 1")
            out.append(n)
    if not out:
        raise BadInput("need at least one resolution")
    return out


def tick_buckets(profile):
    """Finest buckets: the profile's steps clipped to its support hull."""
    sup = profile.support()
    if sup is None:
        return np.empty(0), np.empty(0)
    lo = np.maximum(profile.lo, sup[0])
    hi = np.minimum(profile.hi, sup[1])
    keep = lo < hi
    return lo[keep], hi[keep]


def bin_edges(profile, n):
    """Edges of ``n`` bins of adjacent buckets, counts differing by at most one.

    With fewer buckets than ``n`` every bucket is its own bin.
    """
    lo, hi = tick_buckets(profile)
    if lo.size == 0:
        return np.empty(0)
    groups = [g for g in np.array_split(np.arange(lo.size), n if n != "finest" else lo.size) if g.size]
    edges = [lo[g[0]] for g in groups] + [hi[groups[-1][-1]]]
    sup = profile.support()
    edges[0] = min(edges[0], sup[0])
    edges[-1] = max(edges[-1], sup[1])
    return np.array(edges)


def _invert_bin(sub, target, conv, model):
    try:
        return invert_price(sub, target, conv, model), "ok"
    except BelowIntrinsic:
        return None, "below_intrinsic"


def fine_structure(profile, proxy, conv, resolutions=(1, 3, 6, 12, "finest"), models=MODEL_NAMES):
    """Per-bin implied volatilities for each requested resolution.

    A bin covers ``[lo, hi)``; the last bin also holds an atom sitting
    exactly on the top edge of the support.
    """
    for m in models:
        if m not in MODEL_NAMES:
            raise BadInput(f"unknown model {m!r}")
    rows = []
    for res in resolutions:
        edges = bin_edges(profile, res)
        label = str(res)
        for k in range(max(edges.size - 1, 0)):
            lo, hi = float(edges[k]), float(edges[k + 1])
            top = np.nextafter(hi, math.inf) if k == edges.size - 2 else hi
            sub = profile.restricted(lo, top)
            if sub.is_empty:
                rows.append(BinResult(label, k, lo, hi, 0.0, None, None, "empty_bin"))
                continue
            try:
                target = market_il_price(sub, proxy, conv).total
            except CoverageGap:
                rows.append(BinResult(label, k, lo, hi, None, None, None, "no_coverage"))
                continue
            sig = {"bs": (None, ""), "bachelier": (None, "")}
            for m in models:
                sig[m] = _invert_bin(sub, target, conv, m)
            statuses = [sig[m][1] for m in models]
            status = "ok" if all(s == "ok" for s in statuses) else "below_intrinsic"
            rows.append(
                BinResult(label, k, lo, hi, target, sig["bs"][0], sig["bachelier"][0], status, sig["bs"][1], sig["bachelier"][1])
            )
    return rows


CSV_COLUMNS = ("resolution", "bin_lo", "bin_hi", "x_lo", "x_hi", "market_price", "sigma_bs", "sigma_b_norm", "status")


def _fmt(v):
    return "" if v is None else repr(float(v))


def bins_to_csv(rows, F):
    """CSV text with log-moneyness ``x = log(K/F)`` of the bin edges."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r.resolution,
                _fmt(r.lo),
                _fmt(r.hi),
                _fmt(math.log(r.lo / F)),
                _fmt(math.log(r.hi / F)),
                _fmt(r.market_price),
                _fmt(r.sigma_bs),
                _fmt(r.sigma_b_norm),
                r.status,
            ]
        )
    return buf.getvalue()
