"""Exception types shared across the package."""

__all__ = ["ResourceLimitError", "NotErgodicError", "InsufficientSignalError"]


class ResourceLimitError(ValueError):
    """A requested exact computation exceeds a hard size cap."""


class NotErgodicError(ValueError):
    """The chain has no unique stationary distribution."""


class InsufficientSignalError(RuntimeError):
    """An estimate cannot be formed from the available data."""
