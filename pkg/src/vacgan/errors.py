"""Exception types raised across the package."""


class VacganError(Exception):
    """Base class for every error raised by vacgan."""


class ShapeMismatch(VacganError, ValueError):
    pass


class NonFinite(VacganError, ArithmeticError):
    pass


class NotScalar(VacganError, ValueError):
    pass


class DetachedOutput(VacganError, ValueError):
    pass


class InvalidConfig(VacganError, ValueError):
    pass


class Boundary(VacganError, ValueError):
    """A latent vector sits exactly on the class partition boundary."""


class ZeroDensity(VacganError, ValueError):
    pass


class Infinite(VacganError, ArithmeticError):
    """A divergence is +inf because of a support violation."""


class EmptyBinRange(VacganError, ValueError):
    pass


class DimensionMismatch(VacganError, ValueError):
    pass


class AllWindowsDegenerate(VacganError, ValueError):
    pass


class NoPairs(VacganError, ValueError):
    pass


class InvalidSpec(VacganError, ValueError):
    pass


class IoError(VacganError, OSError):
    pass


class BadFormat(VacganError, ValueError):
    pass


class BadLabel(VacganError, ValueError):
    pass


class ConfigError(VacganError, ValueError):
    """Configuration file could not be parsed or validated.

    ``key`` names the offending configuration key when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class StepError(VacganError, RuntimeError):
    """Wraps an error raised inside a training step, recording the step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
