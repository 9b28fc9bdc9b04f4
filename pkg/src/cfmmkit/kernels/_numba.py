"""numba-compiled kernels, bit-for-bit the same contracts as ``_numpy``."""
import numpy as np
from numba import njit


@njit(cache=True)
def step_density(q, lo, hi, ell):
    out = np.zeros(q.shape[0])
    n = lo.shape[0]
    for k in range(q.shape[0]):
        x = q[k]
        # last lo <= x
        a, b = 0, n
        while a < b:
            mid = (a + b) // 2
            if lo[mid] <= x:
                a = mid + 1
            else:
                b = mid
        j = a - 1
        if j >= 0 and x < hi[j]:
            out[k] = ell[j] / (2.0 * x**1.5)
    return out


@njit(cache=True)
def lvr_cumulative(dens, paths):
    n, m1 = paths.shape
    out = np.zeros((n, m1))
    for i in range(n):
        acc = 0.0
        for k in range(m1 - 1):
            d = paths[i, k + 1] - paths[i, k]
            acc += 0.5 * dens[i, k] * d * d
            out[i, k + 1] = acc
    return out


@njit(cache=True)
def hedging_cumulative(dx, paths):
    n, m1 = paths.shape
    out = np.zeros((n, m1))
    for i in range(n):
        acc = 0.0
        for k in range(m1 - 1):
            acc += dx[i, k] * (paths[i, k + 1] - paths[i, k])
            out[i, k + 1] = acc
    return out


@njit(cache=True)
def gbm_paths(p0, drift_dt, vol_sqdt, z):
    n, m = z.shape
    out = np.empty((n, m + 1))
    for i in range(n):
        p = p0
        out[i, 0] = p
        for k in range(m):
            p = p * np.exp(drift_dt + vol_sqdt * z[i, k])
            out[i, k + 1] = p
    return out


@njit(cache=True)
def cev_paths(p0, nu, beta, dt, z):
    n, m = z.shape
    out = np.empty((n, m + 1))
    absorbed = np.zeros(n, dtype=np.bool_)
    sq = np.sqrt(dt)
    for i in range(n):
        p = p0
        out[i, 0] = p
        for k in range(m):
            if not absorbed[i]:
                p = p + nu * p**beta * sq * z[i, k]
                if p <= 0.0:
                    p = 0.0
                    absorbed[i] = True
            out[i, k + 1] = p
    return out, absorbed


@njit(cache=True)
def tick_remainder_sum(tick_lo, tick_hi, ell, log_alpha, c_up, c_down):
    # Kahan-compensated; wide steps can hold ~1e6 ticks
    am1 = np.expm1(log_alpha)
    s = 0.0
    comp = 0.0
    for j in range(tick_lo.shape[0]):
        l = ell[j]
        if l == 0.0:
            continue
        for i in range(tick_lo[j], tick_hi[j]):
            fi = float(i)
            t = l * am1 * (c_up * np.exp(fi * log_alpha) - c_down * np.exp(-(fi + 1.0) * log_alpha))
            y = t - comp
            u = s + y
            comp = (u - s) - y
            s = u
    return s
