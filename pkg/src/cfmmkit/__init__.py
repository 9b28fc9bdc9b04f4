"""Price/intrinsic-liquidity toolkit for constant-function market makers."""
from importlib.metadata import PackageNotFoundError, version

from .errors import CFMMError, InputError, NumericError
from .profiles import LiquidityProfile, TickLadder, reserves

try:
    __version__ = version("cfmmkit")
except PackageNotFoundError:  # pragma: no cover - source checkout
    __version__ = "0.0.0"

__all__ = ["CFMMError", "InputError", "NumericError", "LiquidityProfile", "TickLadder", "reserves", "__version__"]
