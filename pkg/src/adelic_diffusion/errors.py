"""Exception types shared across the package."""


class AdelicDiffusionError(Exception):
    """Base class for all package errors."""


class PrimeMismatchError(AdelicDiffusionError, ValueError):
    """Two p-adic values with different primes were combined."""


class PrecisionError(AdelicDiffusionError, ValueError):
    """A query asked for digits beyond the known modulus of a value."""


class ValuationRangeError(AdelicDiffusionError, OverflowError):
    """A valuation left the supported range [-2**20, 2**20]."""


class TruncationError(AdelicDiffusionError, ArithmeticError):
    """A series or sampling window could not reach its target within limits."""


class BridgeUnderflowError(AdelicDiffusionError, ArithmeticError):
    """Bridge endpoints are too far apart for the horizon: density underflows."""


class ResolutionError(AdelicDiffusionError, ValueError):
    """A functional was requested below the spatial resolution of a path."""


class SummabilityError(AdelicDiffusionError, ValueError):
    """A diffusion-constant sequence with a divergent sum was requested."""


class ConfigError(AdelicDiffusionError, ValueError):
    """Invalid experiment configuration."""
