"""Pure-numpy kernels. Reference path; also used when numba is disabled."""
import numpy as np


def step_density(q, lo, hi, ell):
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros(q.shape)
    if lo.size == 0:
        return out
    j = np.searchsorted(lo, q, side="right") - 1
    jc = np.clip(j, 0, lo.size - 1)
    inside = (j >= 0) & (q < hi[jc])
    out[inside] = ell[jc[inside]] / (2.0 * q[inside] ** 1.5)
    return out


def lvr_cumulative(dens, paths):
    dp = np.diff(paths, axis=1)
    out = np.zeros(paths.shape)
    np.cumsum(0.5 * dens * dp * dp, axis=1, out=out[:, 1:])
    return out


def hedging_cumulative(dx, paths):
    dp = np.diff(paths, axis=1)
    out = np.zeros(paths.shape)
    np.cumsum(dx * dp, axis=1, out=out[:, 1:])
    return out


def gbm_paths(p0, drift_dt, vol_sqdt, z):
    n, m = z.shape
    out = np.empty((n, m + 1))
    out[:, 0] = p0
    out[:, 1:] = np.exp(drift_dt + vol_sqdt * z)
    return np.cumprod(out, axis=1)


def cev_paths(p0, nu, beta, dt, z):
    n, m = z.shape
    out = np.empty((n, m + 1))
    out[:, 0] = p0
    absorbed = np.zeros(n, dtype=np.bool_)
    sq = np.sqrt(dt)
    p = np.full(n, float(p0))
    for k in range(m):
        live = ~absorbed
        step = np.zeros(n)
        step[live] = nu * p[live] ** beta * sq * z[live, k]
        p = p + step
        hit = live & (p <= 0.0)
        p[hit] = 0.0
        absorbed |= hit
        out[:, k + 1] = p
    return out, absorbed


def tick_remainder_sum(tick_lo, tick_hi, ell, log_alpha, c_up, c_down):
    am1 = np.expm1(log_alpha)
    terms = []
    for a, b, l in zip(tick_lo, tick_hi, ell):
        if b <= a or l == 0.0:
            continue
        i = np.arange(a, b, dtype=np.float64)
        terms.append(l * am1 * (c_up * np.exp(i * log_alpha) - c_down * np.exp(-(i + 1.0) * log_alpha)))
    if not terms:
        return 0.0
    return float(np.sum(np.concatenate(terms)))
