"""Risk-neutral IL prices as weighted option strips.

The IL price of a profile is

    Pi = int_0^P0 L(K) P(K) dK + int_P0^inf L(K) C(K) dK,

puts below the pool price and calls above. On a cell where ``ell`` is
constant, every integrand is ``ell/2 * O(K) * K^-1.5``:

* market side: ``O`` is affine on each partition cell and the integral is
  closed form (``segment_integral_affine``);
* Black-Scholes: ``int O K^-1.5`` has an elementary antiderivative
  (integration by parts, then ``int N(d2) K^-0.5`` in closed form);
* Bachelier: exact boundary term plus Gauss-Legendre on ``O'(K)/sqrt(K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import kernels
from .errors import BadInput, BadInterval, CoverageGap, NotTickAligned
from .models import MODELS, bachelier_price, bs_price
from .profiles import TICK_BASE, step_ell_at
from .quadrature import gauss_legendre

GL_ORDER = 32
_MAX_PANELS = 4096


@dataclass(frozen=True, eq=False)
class Partition:
    breakpoints: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.breakpoints, dtype=float)
        if b.ndim != 1 or np.any(np.diff(b) <= 0):
            raise BadInput("breakpoints must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)

    @property
    def cells(self):
        return self.breakpoints[:-1], self.breakpoints[1:]


@dataclass(frozen=True)
class ILPrice:
    total: float
    put_leg: float
    call_leg: float
    per_cell: tuple = ()  # ((lo, hi), value); atoms appear as (q0, q0)


def merge_breakpoints(*sets, rtol=1e-12):
    """Sorted union of price sets, merging points within ``rtol`` relative."""
    pts = np.sort(np.concatenate([np.atleast_1d(np.asarray(s, dtype=float)) for s in sets]))
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        return pts
    keep = np.ones(pts.size, dtype=bool)
    last = pts[0]
    for i in range(1, pts.size):
        if pts[i] - last <= rtol * abs(last):
            keep[i] = False
        else:
            last = pts[i]
    return pts[keep]


def _check_coverage(proxy, lo, hi, p0):
    """Puts must cover ``[lo, p0]`` and calls ``[p0, hi]`` where the profile lives."""
    if lo < p0:
        c_lo, c_hi = proxy.put_curve.coverage
        top = min(hi, p0)
        if lo < c_lo * (1 - 1e-12):
            raise CoverageGap(lo, min(c_lo, top), "put")
        if top > c_hi * (1 + 1e-12):
            raise CoverageGap(max(c_hi, lo), top, "put")
    if hi > p0:
        c_lo, c_hi = proxy.call_curve.coverage
        bot = max(lo, p0)
        if bot < c_lo * (1 - 1e-12):
            raise CoverageGap(bot, min(c_lo, hi), "call")
        if hi > c_hi * (1 + 1e-12):
            raise CoverageGap(max(c_hi, bot), hi, "call")


def build_partition(profile, proxy, p0):
    """Cells on which ``ell`` is constant and the proxy is affine.

    Breakpoints are the step edges, the proxy strike knots and ``p0``,
    clipped to the hull of the profile's support.
    """
    sup = profile.support()
    if sup is None:
        return Partition(np.empty(0))
    lo, hi = sup
    _check_coverage(proxy, lo, hi, p0)
    pts = merge_breakpoints(profile.lo, profile.hi, proxy.knots(), [p0])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return Partition(merge_breakpoints([lo], pts, [hi]))


def segment_integral_affine(ell, a, b, a0, a1):
    """``int_a^b ell/(2 q^1.5) (a0 + a1 q) dq`` (elementwise).

    Uses ``ell (sqrt b - sqrt a)(a0/sqrt(ab) + a1)``, which equals the
    textbook antiderivative difference without its cancellation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > a)):
        raise BadInterval("need 0 < a < b")
    val = ell * (np.sqrt(b) - np.sqrt(a)) * (a0 / np.sqrt(a * b) + a1)
    return float(val) if np.ndim(val) == 0 else val


def _finish(put_cells, call_cells, put_vals, call_vals, atom_rows):
    """Assemble an ILPrice with pairwise (numpy) summation in fixed order."""
    put_vals = np.asarray(put_vals, dtype=float)
    call_vals = np.asarray(call_vals, dtype=float)
    atom_put = [v for (q, v, side) in atom_rows if side == "put"]
    atom_call = [v for (q, v, side) in atom_rows if side == "call"]
    put_leg = float(np.sum(np.concatenate([put_vals, atom_put])))
    call_leg = float(np.sum(np.concatenate([call_vals, atom_call])))
    rows = [((float(a), float(b)), float(v)) for (a, b), v in zip(put_cells, put_vals)]
    rows += [((float(a), float(b)), float(v)) for (a, b), v in zip(call_cells, call_vals)]
    rows += [((float(q), float(q)), float(v)) for q, v, _ in atom_rows]
    rows.sort(key=lambda r: r[0])
    return ILPrice(put_leg + call_leg, put_leg, call_leg, tuple(rows))


def _split_cells(profile, p0, extra=()):
    """Live step cells split at ``p0`` (and any extra points): (lo, hi, ell, is_call)."""
    pts = merge_breakpoints(profile.lo, profile.hi, [p0], extra)
    if pts.size < 2:
        return np.empty(0), np.empty(0), np.empty(0), np.empty(0, dtype=bool)
    a, b = pts[:-1], pts[1:]
    mid = np.where(np.isinf(b), 2.0 * a, 0.5 * (a + b))
    ell = step_ell_at(profile, mid)
    live = ell > 0
    a, b, ell = a[live], b[live], ell[live]
    return a, b, ell, a >= p0


# market side -----------------------------------------------------------------
def market_il_price(profile, proxy, conv):
    """IL price against the piecewise-affine market proxy, exact per cell."""
    part = build_partition(profile, proxy, conv.P0)
    put_c, put_v, call_c, call_v = [], [], [], []
    if part.breakpoints.size >= 2:
        a, b = part.cells
        ell = step_ell_at(profile, 0.5 * (a + b))
        live = ell > 0
        a, b, ell = a[live], b[live], ell[live]
        is_call = a >= conv.P0
        for flag, cells, vals, kind in ((False, put_c, put_v, "put"), (True, call_c, call_v, "call")):
            sel = is_call == flag
            if not np.any(sel):
                continue
            c0, c1 = proxy.curve(kind).cell_coefficients(a[sel], b[sel])
            vals.extend(np.atleast_1d(segment_integral_affine(ell[sel], a[sel], b[sel], c0, c1)))
            cells.extend(zip(a[sel], b[sel]))
    atoms = []
    for q, m in profile.atoms:
        kind = "put" if q <= conv.P0 else "call"
        atoms.append((q, m * float(proxy.curve(kind)(q)), kind))
    return _finish(put_c, call_c, put_v, call_v, atoms)


def all_calls_il_price(profile, call_curve):
    """``int L C`` over the whole support using only the call curve."""
    total = 0.0
    sup = profile.support()
    if sup is None:
        return 0.0
    pts = merge_breakpoints(profile.lo, profile.hi, call_curve.knots)
    pts = pts[(pts >= sup[0]) & (pts <= sup[1])]
    a, b = pts[:-1], pts[1:]
    ell = step_ell_at(profile, 0.5 * (a + b))
    live = ell > 0
    if np.any(live):
        c0, c1 = call_curve.cell_coefficients(a[live], b[live])
        total += float(np.sum(segment_integral_affine(ell[live], a[live], b[live], c0, c1)))
    for q, m in profile.atoms:
        total += m * float(call_curve(q))
    return total


# Black-Scholes -------------------------------------------------------------
def _bs_antiderivative(K, F, s, D, is_call):
    """Antiderivative in K of ``O_BS(K) K^-1.5``."""
    sq = np.sqrt(K)
    lf = np.log(F / K)
    d1 = lf / s + 0.5 * s
    d2 = d1 - s
    m = lf / s
    g = 4.0 * math.sqrt(F) * math.exp(-0.125 * s * s)
    if is_call:
        return D * (-2.0 * F * ndtr(d1) / sq - 2.0 * sq * ndtr(d2) + g * ndtr(m))
    return D * (2.0 * F * ndtr(-d1) / sq + 2.0 * sq * ndtr(-d2) - g * ndtr(-m))


def _gl_cells(f, a, b, n=GL_ORDER):
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    nodes = half[:, None] * x + (0.5 * (a + b))[:, None]
    return half * np.sum(f(nodes) * w, axis=-1)


def bs_cell_integral(a, b, F, s, D, is_call, n=GL_ORDER):
    """``int_a^b O_BS(K) K^-1.5 dK`` per cell, total vol ``s = sigma sqrt(T)``.

    Cells narrower than ``4 s`` in log-strike use ``n``-point Gauss-Legendre
    (the antiderivative difference would cancel there); wider cells use the
    closed form.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(a.shape)
    narrow = np.log(b / a) <= 4.0 * s
    kind = "call" if is_call else "put"
    if np.any(narrow):
        out[narrow] = _gl_cells(lambda K: bs_price(F, K, 1.0, s, 0.0, kind) * D * K**-1.5, a[narrow], b[narrow], n)
    wide = ~narrow
    if np.any(wide):
        hi = _bs_antiderivative(b[wide], F, s, D, is_call)
        lo = _bs_antiderivative(a[wide], F, s, D, is_call)
        val = hi - lo
        # far wings: the difference cancels, so integrate on log-panels instead
        lost = np.abs(val) < 1e-5 * (np.abs(hi) + np.abs(lo))
        if np.any(lost):
            la, lb = np.log(a[wide][lost]), np.log(b[wide][lost])
            pa, pb, owner = _panels(la, lb, 2.0 * s)
            pa, pb = np.exp(pa), np.exp(pb)
            vals = _gl_cells(lambda K: bs_price(F, K, 1.0, s, 0.0, kind) * D * K**-1.5, pa, pb, n)
            val[lost] = np.bincount(owner, weights=vals, minlength=la.size)
        out[wide] = val
    return out


def _intrinsic_cells(a, b, ell, F, D, is_call):
    """Strip of discounted intrinsic values (zero-vol limit) per cell."""
    out = np.zeros(a.shape)
    if is_call:  # (F - K)^+ lives on K < F
        hi = np.minimum(b, F)
        sel = hi > a
        out[sel] = segment_integral_affine(ell[sel], a[sel], hi[sel], D * F, -D)
    else:
        lo = np.maximum(a, F)
        sel = b > lo
        out[sel] = segment_integral_affine(ell[sel], lo[sel], b[sel], -D * F, D)
    return out


def _model_il_price(profile, sigma, conv, cell_integral, price_fn):
    if not sigma >= 0:
        raise BadInput("sigma must be >= 0")
    profile.check_bounded()
    F, D = conv.F, conv.discount
    a, b, ell, is_call = _split_cells(profile, conv.P0, [F] if sigma == 0 else ())
    legs = {}
    for flag in (False, True):
        sel = is_call == flag
        if sigma == 0:
            vals = _intrinsic_cells(a[sel], b[sel], ell[sel], F, D, flag)
        else:
            vals = 0.5 * ell[sel] * cell_integral(a[sel], b[sel], flag)
        legs[flag] = (list(zip(a[sel], b[sel])), vals)
    atoms = []
    for q, m in profile.atoms:
        kind = "put" if q <= conv.P0 else "call"
        atoms.append((q, m * float(price_fn(F, q, conv.T, sigma, conv.r, kind)), kind))
    return _finish(legs[False][0], legs[True][0], legs[False][1], legs[True][1], atoms)


def model_il_price_bs(profile, sigma, conv):
    """IL price with flat Black-Scholes volatility ``sigma`` on every strike."""
    s = sigma * math.sqrt(conv.T)

    def cell(a, b, flag):
        return bs_cell_integral(a, b, conv.F, s, conv.discount, flag)

    return _model_il_price(profile, sigma, conv, cell, bs_price)


# Bachelier -------------------------------------------------------------------
def _panels(a, b, width, max_panels=_MAX_PANELS):
    """Split each [a_i, b_i] into equal panels no wider than ``width``."""
    k = np.clip(np.ceil((b - a) / width), 1, max_panels).astype(np.int64)
    owner = np.repeat(np.arange(a.size), k)
    first = np.repeat(np.cumsum(k) - k, k)
    j = np.arange(owner.size) - first
    h = (b - a)[owner] / k[owner]
    lo = a[owner] + j * h
    hi = np.where(j == k[owner] - 1, b[owner], lo + h)
    return lo, hi, owner


def bachelier_aux_integral(a, b, F, s_n, n=GL_ORDER, panel_width=None):
    """``int_a^b Phi(d(K))/sqrt(K) dK`` with ``d = (F - K)/s_n``.

    ``n``-point Gauss-Legendre per panel; by default each cell is a single
    panel, ``panel_width`` subdivides wide cells.
    """
    return _gl_panels_or_cells(lambda K: ndtr((F - K) / s_n) / np.sqrt(K), a, b, n, panel_width)


def bachelier_cell_integral(a, b, F, s_n, D, is_call, n=GL_ORDER, panel_width=None):
    """``int_a^b O_B(K) K^-1.5 dK``: exact boundary term plus quadrature.

    ``O'(K) = -D Phi(d)`` for calls and ``D (1 - Phi(d))`` for puts.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kind = "call" if is_call else "put"

    def boundary(K):
        return -2.0 * bachelier_price(F, K, 1.0, s_n, 0.0, kind) * D / np.sqrt(K)

    if is_call:
        rem = -_gl_panels_or_cells(lambda K: ndtr((F - K) / s_n) / np.sqrt(K), a, b, n, panel_width)
    else:
        # 1 - Phi(d) = Phi(-d), evaluated directly so deep-OTM puts do not cancel
        rem = _gl_panels_or_cells(lambda K: ndtr((K - F) / s_n) / np.sqrt(K), a, b, n, panel_width)
    return boundary(b) - boundary(a) + 2.0 * D * rem


def _gl_panels_or_cells(f, a, b, n, panel_width):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if panel_width is None:
        return _gl_cells(f, a, b, n)
    lo, hi, owner = _panels(a, b, panel_width)
    return np.bincount(owner, weights=_gl_cells(f, lo, hi, n), minlength=a.size)


def model_il_price_bachelier(profile, sigma_n, conv, n=GL_ORDER):
    """IL price with flat normal volatility ``sigma_n`` (price units/sqrt(year)).

    Cells wider than six normal standard deviations are split into panels
    so the fixed-order rule stays at machine precision.
    """
    s_n = sigma_n * math.sqrt(conv.T)

    def cell(a, b, flag):
        return bachelier_cell_integral(a, b, conv.F, s_n, conv.discount, flag, n, panel_width=6.0 * s_n)

    return _model_il_price(profile, sigma_n, conv, cell, bachelier_price)


def model_il_pricer(profile, conv, model="bs"):
    """``sigma -> model_il_price(profile, sigma, conv, model).total``, for repeated calls.

    Cells and atoms are split once; each call only evaluates the cell
    integrals. Sums run in the same order as ``model_il_price``, so the two
    agree bit for bit.
    """
    if model not in ("bs", "bachelier"):
        raise BadInput(f"unknown model {model!r}")
    profile.check_bounded()
    F, D, T = conv.F, conv.discount, conv.T
    a, b, ell, is_call = _split_cells(profile, conv.P0)
    legs = [(a[is_call == f], b[is_call == f], ell[is_call == f], f) for f in (False, True)]
    atoms = {f: np.array([(q, m) for q, m in profile.atoms if (q > conv.P0) == f]).reshape(-1, 2) for f in (False, True)}

    def total(sigma):
        if not sigma > 0:
            return model_il_price(profile, sigma, conv, model).total
        if model == "bs":
            s = sigma * math.sqrt(T)
            cell, price_fn = (lambda lo, hi, f: bs_cell_integral(lo, hi, F, s, D, f)), bs_price
        else:
            s_n = sigma * math.sqrt(T)
            cell = lambda lo, hi, f: bachelier_cell_integral(lo, hi, F, s_n, D, f, GL_ORDER, panel_width=6.0 * s_n)
            price_fn = bachelier_price
        out = 0.0
        for lo, hi, w, flag in legs:
            vals = 0.5 * w * cell(lo, hi, flag) if lo.size else np.empty(0)
            at = atoms[flag]
            kind = "call" if flag else "put"
            extra = [m * float(price_fn(F, q, T, sigma, conv.r, kind)) for q, m in at]
            out += float(np.sum(np.concatenate([vals, extra])))
        return out

    return total


def model_il_price(profile, sigma, conv, model="bs"):
    if model == "bs":
        return model_il_price_bs(profile, sigma, conv)
    if model == "bachelier":
        return model_il_price_bachelier(profile, sigma, conv)
    raise BadInput(f"unknown model {model!r}")


# Greeks ----------------------------------------------------------------------
def il_greeks_rn(profile, sigma, conv, model="bs", n=GL_ORDER):
    """Risk-neutral (delta, gamma, vega) of the IL price, flat ``sigma``.

    Each is ``int L(K) greek(K) dK`` with puts below ``P0`` and calls
    above, by ``n``-point Gauss-Legendre on panels no wider than one
    standard deviation (log-strike for Black-Scholes, strike for
    Bachelier).
    """
    if model not in MODELS:
        raise BadInput(f"unknown model {model!r}")
    if not sigma >= 0:
        raise BadInput("sigma must be >= 0")
    profile.check_bounded()
    _, delta_fn, gamma_fn, vega_fn = MODELS[model]
    F, T, r = conv.F, conv.T, conv.r
    a, b, ell, is_call = _split_cells(profile, conv.P0, [F])
    s = sigma * math.sqrt(T)
    out = []
    for fn in (delta_fn, gamma_fn, vega_fn):
        total = 0.0
        for flag in (False, True):
            sel = is_call == flag
            if not np.any(sel):
                continue
            ca, cb, ce = a[sel], b[sel], ell[sel]
            kind = "call" if flag else "put"
            if model == "bs":
                # panels uniform in log-strike
                la, lb = np.log(ca), np.log(cb)
                lo, hi, owner = _panels(la, lb, max(s, 1e-12))
                lo, hi = np.exp(lo), np.exp(hi)
            else:
                lo, hi, owner = _panels(ca, cb, max(s, 1e-12 * F))

            def integrand(K, kind=kind):
                return K**-1.5 * fn(F, K, T, sigma, r, kind)

            vals = 0.5 * ce[owner] * _gl_cells(integrand, lo, hi, n)
            total += float(np.sum(vals))
        for q, m in profile.atoms:
            total += m * float(fn(F, q, T, sigma, r, "put" if q <= conv.P0 else "call"))
        out.append(total)
    return tuple(out)


# tick remainder ----------------------------------------------------------------
def _tick_index(price, scale, tol=1e-9):
    raw = math.log(price / scale) / math.log(TICK_BASE)
    i = round(raw)
    if abs(price / (scale * TICK_BASE**i) - 1.0) > tol:
        raise NotTickAligned(f"price {price!r} is not a tick price at scale {scale!r}")
    return int(i)


def remainder_sum(profile, conv, decimal_scale=1.0):
    """``int_0^P0 L(q) (q e^{-rT} - P0 e^{-delta T}) dq`` as a tick sum.

    The profile's breakpoints must be ``decimal_scale * 1.0001**i``. Full
    tick intervals below the tick ``k`` containing ``P0`` go through the
    summation kernel; the partial interval ``[x_k, P0)`` is added in closed
    form.
    """
    if profile.atom_q.size:
        raise BadInput("remainder_sum takes a tick-derived step profile (no atoms)")
    P0 = conv.P0
    log_alpha = 0.5 * math.log1p(TICK_BASE - 1.0)
    sqs = math.sqrt(decimal_scale)
    e_r = math.exp(-conv.r * conv.T)
    e_d = math.exp(-conv.delta * conv.T)
    k = math.floor(math.log(P0 / decimal_scale) / math.log(TICK_BASE) + 1e-9)
    tlo, thi, ells = [], [], []
    partial = 0.0
    for lo, hi, ell in profile.steps:
        if ell == 0.0 or lo >= P0:
            continue
        i = _tick_index(lo, decimal_scale)
        j = _tick_index(hi, decimal_scale) if math.isfinite(hi) else k + 1
        tlo.append(i)
        thi.append(min(j, k))
        ells.append(ell)
        if j > k:
            x_k = decimal_scale * TICK_BASE**k
            partial += ell * (e_r * (math.sqrt(P0) - math.sqrt(x_k)) + P0 * e_d * (1.0 / math.sqrt(P0) - 1.0 / math.sqrt(x_k)))
    body = 0.0
    if tlo:
        body = kernels.tick_remainder_sum(
            np.array(tlo, dtype=np.int64),
            np.array(thi, dtype=np.int64),
            np.array(ells, dtype=float),
            log_alpha,
            e_r * sqs,
            P0 * e_d / sqs,
        )
    return float(body) + partial
