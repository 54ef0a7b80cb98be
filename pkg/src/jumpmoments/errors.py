"""Exception types shared across the package."""


class JumpMomentsError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(JumpMomentsError):
    """An input has the wrong shape or an invalid dimension."""


class InvalidInputError(JumpMomentsError):
    """An input contains non-finite or otherwise unusable values."""


class SymmetryViolationError(JumpMomentsError):
    """A generator matrix is not symmetric within tolerance."""


class TildeViolationError(JumpMomentsError):
    """A generator matrix is not tilde-real, so its jump operator would not
    be unitary."""


class ConditioningError(JumpMomentsError):
    """A structural post-check failed after matrix exponentiation."""


class ConfigurationError(JumpMomentsError):
    """A run configuration is inconsistent or malformed."""


class CapacityError(JumpMomentsError):
    """A requested object exceeds the configured size budget."""


class AccuracyError(JumpMomentsError):
    """An iterative scheme stopped before reaching the requested tolerance."""


class RangeOverflowError(JumpMomentsError):
    """A trajectory left the representable floating-point range.

    ``t`` carries the earliest offending time when known.
    """

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class MarginError(JumpMomentsError):
    """The Fock cutoff leaves too little headroom above the occupied levels."""


class LeakageError(JumpMomentsError):
    """Truncation-edge population exceeded the strict-mode threshold."""
