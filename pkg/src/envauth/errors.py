"""Exception types shared across the package."""


class EnvAuthError(Exception):
    """Base class for all package errors."""


class InvalidInput(EnvAuthError):
    """An argument violates a documented precondition."""


class NumericalError(EnvAuthError):
    """A computation produced a non-finite or otherwise unusable result."""


class UnsupportedDimension(EnvAuthError):
    """Histogram-based distance requested above its supported dimension."""


class NoNeighbors(EnvAuthError):
    """Environment-aware authentication needs at least one usable neighbor."""


class NotFound(EnvAuthError):
    """Lookup of an unknown object id."""


class UnsupportedTransfer(EnvAuthError):
    """Transfer between domains of different transform dimensionality."""
