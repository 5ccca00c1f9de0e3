"""Exception types shared across the package."""

__all__ = ["DataError", "NumericalError"]


class DataError(Exception):
    """Input data is malformed, unusable, or violates a documented schema."""


class NumericalError(Exception):
    """A numerical procedure failed beyond its documented tolerances."""
