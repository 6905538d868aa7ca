"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A map parameter, dimension or configuration value is out of range."""


class InvalidDimensionError(InvalidParameterError):
    """Hilbert-space dimension not allowed (zero, negative, or odd where even is needed)."""


class InvariantViolation(RuntimeError):
    """A runtime physical invariant (norm, light cone, normalization) failed."""
