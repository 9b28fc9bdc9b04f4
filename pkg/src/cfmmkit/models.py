"""Vanilla option models on the forward: Black-Scholes and Bachelier.

Prices are ``exp(-r T) E[payoff]`` with the forward ``F`` as the underlying.
Greeks are taken with respect to ``F``. Functions broadcast over arrays.
Zero volatility (or zero maturity) returns the discounted intrinsic value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import BadInput, NegativeSynthetic

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MarketConventions:
    """Forward ``F``, maturity ``T``, rates ``r`` and ``delta``, pool spot ``P0``.

    ``P0`` only splits the IL strip into puts and calls; ``F`` drives model
    prices and parity.
    """

    F: float
    T: float
    P0: float
    r: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (self.T > 0 and self.F > 0 and self.P0 > 0):
            raise BadInput("need T > 0, F > 0, P0 > 0")

    @property
    def discount(self):
        return math.exp(-self.r * self.T)

    @property
    def theoretical_forward(self):
        return self.P0 * math.exp((self.r - self.delta) * self.T)


def _is_call(kind):
    if kind in ("call", "c", "C"):
        return True
    if kind in ("put", "p", "P"):
        return False
    raise BadInput(f"option kind must be 'call' or 'put', got {kind!r}")


def _npdf(x):
    return np.exp(-0.5 * x * x) / SQRT_2PI


def _validate(F, K, T, sigma):
    if np.any(np.asarray(F) <= 0) or np.any(np.asarray(K) <= 0):
        raise BadInput("F and K must be > 0")
    if not T > 0:
        raise BadInput("T must be > 0")
    if np.any(np.asarray(sigma) < 0):
        raise BadInput("sigma must be >= 0")


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


# Black-Scholes --------------------------------------------------------------
def _bs_d(F, K, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(F / K) + 0.5 * s * s) / s
    return d1, d1 - s


def bs_price(F, K, T, sigma, r=0.0, kind="call"):
    _validate(F, K, T, sigma)
    call = _is_call(kind)
    F, K, sigma = (np.asarray(v, dtype=float) for v in (F, K, sigma))
    D = math.exp(-r * T)
    s = sigma * math.sqrt(T)
    live = s > 0
    d1, d2 = _bs_d(F, K, np.where(live, s, 1.0))
    if call:
        val = F * ndtr(d1) - K * ndtr(d2)
        intr = np.maximum(F - K, 0.0)
    else:
        val = K * ndtr(-d2) - F * ndtr(-d1)
        intr = np.maximum(K - F, 0.0)
    return _out(D * np.where(live, val, intr))


def bs_delta(F, K, T, sigma, r=0.0, kind="call"):
    _validate(F, K, T, sigma)
    call = _is_call(kind)
    F, K, sigma = (np.asarray(v, dtype=float) for v in (F, K, sigma))
    D = math.exp(-r * T)
    s = sigma * math.sqrt(T)
    live = s > 0
    d1, _ = _bs_d(F, K, np.where(live, s, 1.0))
    step = np.where(F > K, 1.0, np.where(F == K, 0.5, 0.0))
    nd = np.where(live, ndtr(d1), step)
    return _out(D * (nd if call else nd - 1.0))


def bs_gamma(F, K, T, sigma, r=0.0, kind="call"):
    _validate(F, K, T, sigma)
    _is_call(kind)
    F, K, sigma = (np.asarray(v, dtype=float) for v in (F, K, sigma))
    s = sigma * math.sqrt(T)
    live = s > 0
    ss = np.where(live, s, 1.0)
    d1, _ = _bs_d(F, K, ss)
    return _out(math.exp(-r * T) * np.where(live, _npdf(d1) / (F * ss), 0.0))


def bs_vega(F, K, T, sigma, r=0.0, kind="call"):
    _validate(F, K, T, sigma)
    _is_call(kind)
    F, K, sigma = (np.asarray(v, dtype=float) for v in (F, K, sigma))
    s = sigma * math.sqrt(T)
    live = s > 0
    d1, _ = _bs_d(F, K, np.where(live, s, 1.0))
    return _out(math.exp(-r * T) * np.where(live, F * _npdf(d1) * math.sqrt(T), 0.0))


# Bachelier ------------------------------------------------------------------
def _bach_check(F, K, T, sigma_n):
    if not T > 0:
        raise BadInput("T must be > 0")
    if np.any(np.asarray(sigma_n) < 0):
        raise BadInput("sigma_n must be >= 0")


def bachelier_price(F, K, T, sigma_n, r=0.0, kind="call"):
    _bach_check(F, K, T, sigma_n)
    call = _is_call(kind)
    F, K, sigma_n = (np.asarray(v, dtype=float) for v in (F, K, sigma_n))
    s = sigma_n * math.sqrt(T)
    live = s > 0
    ss = np.where(live, s, 1.0)
    w = F - K if call else K - F
    d = w / ss
    val = w * ndtr(d) + ss * _npdf(d)
    return _out(math.exp(-r * T) * np.where(live, val, np.maximum(w, 0.0)))


def bachelier_delta(F, K, T, sigma_n, r=0.0, kind="call"):
    _bach_check(F, K, T, sigma_n)
    call = _is_call(kind)
    F, K, sigma_n = (np.asarray(v, dtype=float) for v in (F, K, sigma_n))
    s = sigma_n * math.sqrt(T)
    live = s > 0
    d = (F - K) / np.where(live, s, 1.0)
    step = np.where(F > K, 1.0, np.where(F == K, 0.5, 0.0))
    nd = np.where(live, ndtr(d), step)
    return _out(math.exp(-r * T) * (nd if call else nd - 1.0))


def bachelier_gamma(F, K, T, sigma_n, r=0.0, kind="call"):
    _bach_check(F, K, T, sigma_n)
    _is_call(kind)
    F, K, sigma_n = (np.asarray(v, dtype=float) for v in (F, K, sigma_n))
    s = sigma_n * math.sqrt(T)
    live = s > 0
    ss = np.where(live, s, 1.0)
    return _out(math.exp(-r * T) * np.where(live, _npdf((F - K) / ss) / ss, 0.0))


def bachelier_vega(F, K, T, sigma_n, r=0.0, kind="call"):
    _bach_check(F, K, T, sigma_n)
    _is_call(kind)
    F, K, sigma_n = (np.asarray(v, dtype=float) for v in (F, K, sigma_n))
    s = sigma_n * math.sqrt(T)
    live = s > 0
    ss = np.where(live, s, 1.0)
    return _out(math.exp(-r * T) * np.where(live, math.sqrt(T) * _npdf((F - K) / ss), 0.0))


MODELS = {
    "bs": (bs_price, bs_delta, bs_gamma, bs_vega),
    "bachelier": (bachelier_price, bachelier_delta, bachelier_gamma, bachelier_vega),
}


def parity_synthesize(known_price, known_kind, F, K, r=0.0, T=0.0):
    """Price of the other side from ``C - P = exp(-r T) (F - K)``."""
    if known_price < 0:
        raise BadInput("known_price must be >= 0")
    fwd = math.exp(-r * T) * (F - K)
    other = known_price - fwd if _is_call(known_kind) else known_price + fwd
    if other < 0:
        raise NegativeSynthetic(K, other)
    return other
