"""Exception hierarchy.

Every error raised by the library derives from :class:`CFMMError`, which is a
``ValueError`` so callers that only care about bad input can catch that.
"""


class CFMMError(ValueError):
    """Base class for all library errors."""


class InputError(CFMMError):
    """Malformed or out-of-domain input (CLI exit code 2)."""


class NumericError(CFMMError):
    """A numerical procedure failed to converge or bracket (CLI exit code 3)."""


# profiles
class EmptyLadder(InputError):
    pass


class NegativeLiquidity(InputError):
    def __init__(self, tick, value):
        super().__init__(f"anchored liquidity {value!r} < 0 on the interval starting at tick {tick}")
        self.tick = tick
        self.value = value


class DegenerateCurvature(InputError):
    pass


class NonPositivePrice(InputError):
    pass


class UnboundedSupport(InputError):
    pass


# curves
class OutsideSupport(InputError):
    pass


class NotInvertible(NumericError):
    pass


# payoff
class AtomAtPrice(InputError):
    pass


class BadRange(InputError):
    pass


# models / data
class BadInput(InputError):
    pass


class NegativeSynthetic(InputError):
    def __init__(self, strike, value):
        super().__init__(f"parity-synthesized price {value!r} < 0 at strike {strike!r}")
        self.strike = strike
        self.value = value


class TooFewQuotes(InputError):
    pass


class InvariantViolation(InputError):
    pass


class SchemaError(InputError):
    pass


class NetworkError(CFMMError):
    pass


# pricing
class CoverageGap(InputError):
    def __init__(self, lo, hi, leg=""):
        where = f" ({leg} leg)" if leg else ""
        super().__init__(f"market proxy does not cover [{lo!r}, {hi!r}]{where}")
        self.lo = lo
        self.hi = hi
        self.leg = leg


class BadInterval(InputError):
    pass


class NotTickAligned(InputError):
    pass


# implied
class BelowIntrinsic(NumericError):
    pass


class NoBracket(NumericError):
    pass


# dynamics
class SupportExit(NumericError):
    pass


# last passage
class NotUpwardTransient(InputError):
    pass


class YInversionOutOfRange(NumericError):
    pass
