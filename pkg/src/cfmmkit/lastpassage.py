"""Withdrawing liquidity at the last passage time of a price level.

Under GBM ``dP/P = mu dt + sigma dW`` with ``nu = mu - sigma^2/2 > 0`` the
price drifts to infinity, so every level ``P0 e^eps`` has a last visit
``pi``. Exiting there yields the expected discounted P&L

    v(eps) = phi/r - (IL(P0 e^eps) + phi/r) * E[exp(-r pi)],

trading fee income ``phi`` (Y units per year) against the realized IL.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .curves import discretize_density
from .errors import BadInput, NotUpwardTransient, YInversionOutOfRange
from .profiles import mass_below, y_below

EPS_CAP = 20.0
GRID_STEP = 1e-3
EPS_TOL = 1e-10
RECURRENT_TOL = 1e-14


class Transience(enum.Enum):
    UP = "up"
    DOWN = "down"
    RECURRENT = "recurrent"


def classify_transience(mu, sigma):
    if not sigma > 0:
        raise BadInput("sigma must be > 0")
    nu = mu - 0.5 * sigma * sigma
    if abs(nu) <= RECURRENT_TOL:
        return Transience.RECURRENT
    return Transience.UP if nu > 0 else Transience.DOWN


@dataclass(frozen=True)
class ExitParams:
    mu: float
    sigma: float
    r: float
    phi: float
    p0: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise BadInput("sigma must be > 0")
        if not self.r > 0:
            raise BadInput("r must be > 0 (phi/r is the perpetual fee value)")
        if self.phi < 0:
            raise BadInput("phi must be >= 0")
        if not self.p0 > 0:
            raise BadInput("p0 must be > 0")

    @property
    def nu(self):
        return self.mu - 0.5 * self.sigma**2

    @property
    def root(self):
        """sqrt(nu^2 + 2 r sigma^2)."""
        return math.sqrt(self.nu**2 + 2.0 * self.r * self.sigma**2)

    @property
    def fee_value(self):
        return self.phi / self.r


@dataclass(frozen=True)
class ExitResult:
    kind: str  # "Interior" | "Monotone" | "NotApplicable"
    epsilon_star: float | None = None
    v_star: float | None = None
    supremum: float | None = None
    reason: str = ""

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "Interior":
            out.update(epsilon_star=self.epsilon_star, v_star=self.v_star)
        elif self.kind == "Monotone":
            out["supremum"] = self.supremum
        else:
            out["reason"] = self.reason
        return out


def _require_up(params):
    t = classify_transience(params.mu, params.sigma)
    if t is not Transience.UP:
        raise NotUpwardTransient(f"price process is {t.value}-transient/recurrent; need mu > sigma^2/2")


def mgf_last_passage(epsilon, params):
    """``E[exp(-r pi)]`` for the last passage at ``P0 e^eps``."""
    _require_up(params)
    eps = np.asarray(epsilon, dtype=float)
    nu, root, s2 = params.nu, params.root, params.sigma**2
    c0 = nu / root
    with np.errstate(over="ignore"):
        pos = c0 * np.exp(eps / s2 * (nu - root))
        neg = 1.0 - np.exp(2.0 * nu * eps / s2) + c0 * np.exp(eps / s2 * (nu + root))
    out = np.where(eps >= 0, pos, neg)
    return float(out) if out.ndim == 0 else out


def _deltas(profile, p0, pe):
    """``int_{p0}^{pe} L`` and ``int_{p0}^{pe} q L`` (signed)."""
    return mass_below(profile, pe) - mass_below(profile, p0), y_below(profile, pe) - y_below(profile, p0)


def il_at_level(profile, p0, epsilon):
    """Realized IL at ``P0 e^eps``: ``pe * int L - int q L`` over ``[p0, pe]``."""
    pe = p0 * np.exp(np.asarray(epsilon, dtype=float))
    dm, dy = _deltas(profile, p0, pe)
    return pe * dm - dy


def expected_pnl(epsilon, params, profile):
    """``v(eps)``."""
    phi_eps = mgf_last_passage(epsilon, params)
    il = il_at_level(profile, params.p0, epsilon)
    out = params.fee_value - (il + params.fee_value) * phi_eps
    return float(out) if np.ndim(out) == 0 else out


def bracket_term(epsilon, params, profile):
    """Factor of ``v'`` that carries its sign (for ``eps >= 0``)."""
    root, nu, s2 = params.root, params.nu, params.sigma**2
    k = (root - nu - s2) / (root - nu)
    pe = params.p0 * np.exp(np.asarray(epsilon, dtype=float))
    dm, dy = _deltas(profile, params.p0, pe)
    return k * pe * dm - dy + params.fee_value


def v_prime(epsilon, params, profile):
    """``v'(eps)`` as positive prefactor times the bracket term, ``eps >= 0``."""
    _require_up(params)
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps < 0):
        raise BadInput("v_prime is defined for eps >= 0")
    root, nu, s2 = params.root, params.nu, params.sigma**2
    pref = nu * (root - nu) / (s2 * root) * np.exp(eps / s2 * (nu - root))
    out = pref * bracket_term(eps, params, profile)
    return float(out) if out.ndim == 0 else out


def _invert_y(profile, target, lo):
    """Smallest ``p >= lo`` with ``y(p) >= target`` (``y`` nondecreasing)."""
    sup = profile.support()
    top = sup[1] if sup is not None else lo
    y_max = float(y_below(profile, top)) if math.isfinite(top) else math.inf
    if target > y_max * (1 + 1e-15):
        raise YInversionOutOfRange(f"phi/r + y(P0) = {target!r} exceeds sup y = {y_max!r}")
    hi = top if math.isfinite(top) else 2.0 * lo
    while y_below(profile, hi) < target:
        hi *= 2.0
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        if y_below(profile, mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1.0 <= 1e-15:
            break
    return hi


def optimal_exit_explicit(params, profile):
    """``mu = r`` case: the first-order condition is ``y(P0 e^eps) = y(P0) + phi/r``."""
    _require_up(params)
    target = params.fee_value + float(y_below(profile, params.p0))
    p = _invert_y(profile, target, params.p0)
    eps = math.log(p / params.p0)
    return ExitResult("Interior", eps, expected_pnl(eps, params, profile))


def optimal_exit(params, profile, cap=EPS_CAP, step=GRID_STEP, tol=EPS_TOL):
    """Maximize ``v`` over ``eps >= 0``.

    Scans the sign of the bracket term on a grid up to ``cap`` and refines
    the first sign change by bisection; with no sign change ``v`` rises to
    ``phi/r``. When ``mu == r`` the explicit solution is used.
    """
    _require_up(params)
    if params.phi == 0:
        return ExitResult("NotApplicable", reason="no fee income: v(eps) <= 0 = v(0)")
    if abs(params.mu - params.r) <= 1e-12:
        return optimal_exit_explicit(params, profile)
    grid = np.arange(1, int(round(cap / step)) + 1) * step
    b = bracket_term(grid, params, profile)
    neg = np.nonzero(b <= 0)[0]
    if neg.size == 0:
        return ExitResult("Monotone", supremum=params.fee_value)
    j = int(neg[0])
    lo = grid[j - 1] if j > 0 else 0.0
    hi = grid[j]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bracket_term(mid, params, profile) > 0:
            lo = mid
        else:
            hi = mid
    eps = 0.5 * (lo + hi)
    return ExitResult("Interior", eps, expected_pnl(eps, params, profile))


def exponential_profile(p0=1.0, scale=10.0, lo=0.01, hi=60.0, n=10_000):
    """Step version of ``L(q) = exp(-|q - p0| / scale)`` on ``(lo, hi)``."""
    bp = np.union1d(np.linspace(lo, hi, n + 1), [p0])
    return discretize_density(lambda q: np.exp(-np.abs(q - p0) / scale), bp)


def pnl_curve(params, profile, eps_max=3.0, points=301):
    """``(eps, v(eps))`` on a uniform grid, for plotting."""
    eps = np.linspace(0.0, eps_max, points)
    return eps, np.asarray(expected_pnl(eps, params, profile))
