"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``CFMMKIT_DISABLE_NUMBA`` is unset (or ``0``). Both
backends share one contract; ``tests/test_kernels.py`` checks they agree.
"""
import os
import warnings

from . import _numpy as numpy_impl

_disabled = os.environ.get("CFMMKIT_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

numba_impl = None
if not _disabled:
    try:
        from . import _numba as numba_impl
    except ImportError:  # pragma: no cover - depends on environment
        warnings.warn("numba unavailable; falling back to numpy kernels")
        numba_impl = None

active = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if active is numba_impl else "numpy"

KERNELS = (
    "step_density",
    "lvr_cumulative",
    "hedging_cumulative",
    "gbm_paths",
    "cev_paths",
    "tick_remainder_sum",
)

step_density = active.step_density
lvr_cumulative = active.lvr_cumulative
hedging_cumulative = active.hedging_cumulative
gbm_paths = active.gbm_paths
cev_paths = active.cev_paths
tick_remainder_sum = active.tick_remainder_sum
