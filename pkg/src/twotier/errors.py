"""Exception types shared across the package."""

from __future__ import annotations


class ShapeError(ValueError):
    """Operands have incompatible or malformed dimensions."""


class NotPositiveDefiniteError(ArithmeticError):
    """A factorization hit a non-positive pivot, even after jitter retries.

    Attributes:
        pivot_index: zero-based index of the failing pivot.
    """

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = pivot_index
        super().__init__(message or f"matrix is not positive definite (pivot {pivot_index})")


class FixedPointNotPositiveDefiniteError(NotPositiveDefiniteError):
    """The system lost positive definiteness under quantization."""

    def __init__(self, pivot_index: int):
        super().__init__(
            pivot_index,
            f"system is not positive definite under quantization (pivot {pivot_index})",
        )


class NumericError(ArithmeticError):
    """A numeric quantity became non-finite during an update.

    Attributes:
        param_index: flat index of the first offending parameter, or -1.
    """

    def __init__(self, message: str, param_index: int = -1):
        self.param_index = param_index
        super().__init__(message)


class ConfigError(ValueError):
    """A configuration document is malformed or out of range.

    Attributes:
        field: name of the offending field, when one can be singled out.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class StateError(RuntimeError):
    """An operation was called on an object in the wrong state."""
