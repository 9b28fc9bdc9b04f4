"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--paths 10000] [--steps 1000] [--repeat 3]

Each kernel runs on identical inputs in both backends; the table reports the
best of ``--repeat`` wall times, the speedup and the largest relative
difference between the two outputs. Numba compilation happens in a warm-up
call that is not timed.
"""
import argparse
import time

import numpy as np

from cfmmkit.kernels import _numba, _numpy


def _cases(paths, steps, rng):
    z = rng.standard_normal((paths, steps))
    dt = 1.0 / steps
    gbm = _numpy.gbm_paths(1.0, -0.125 * dt, 0.5 * np.sqrt(dt), z)
    lo = np.linspace(0.2, 3.0, 400)
    hi = np.append(lo[1:], 3.2)
    ell = rng.uniform(0.1, 5.0, lo.size)
    dens = _numpy.step_density(gbm[:, :-1].ravel(), lo, hi, ell).reshape(paths, steps)
    dx = rng.standard_normal(dens.shape)
    ticks = np.sort(rng.choice(np.arange(60_000, 90_000), 2001, replace=False))
    return {
        "gbm_paths": (1.0, -0.125 * dt, 0.5 * np.sqrt(dt), z),
        "cev_paths": (1.0, 0.5, 1.0, dt, z),
        "step_density": (gbm.ravel(), lo, hi, ell),
        "lvr_cumulative": (dens, gbm),
        "hedging_cumulative": (dx, gbm),
        "tick_remainder_sum": (
            ticks[:-1].astype(np.int64),
            ticks[1:].astype(np.int64),
            rng.uniform(0.0, 5.0, ticks.size - 1),
            0.5 * np.log1p(1e-4),
            1.0,
            3000.0,
        ),
    }


def _best(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out, dtype=float)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cases = _cases(args.paths, args.steps, np.random.default_rng(args.seed))
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max rel diff':>15}")
    for name, kargs in cases.items():
        getattr(_numba, name)(*kargs)  # compile
        t_np, out_np = _best(getattr(_numpy, name), kargs, args.repeat)
        t_nb, out_nb = _best(getattr(_numba, name), kargs, args.repeat)
        a, b = _first(out_np), _first(out_nb)
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))) if a.size else 0.0
        print(f"{name:<20}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>15.1e}")


if __name__ == "__main__":
    main()
