"""
Utility functions shared across the simulator.

Validators follow a single convention: they return True when the value is
acceptable and raise ValidationError otherwise, so they can be chained in
``__post_init__`` hooks and operation preambles alike.
"""

import math
from typing import Any, Optional, Sequence

import numpy as np

from .exceptions import ValidationError


class ValidationUtils:
    """Utility class for validation operations."""

    @staticmethod
    def validate_positive_int(value: Any, name: str) -> bool:
        """
        Validate that a value is an integer >= 1.

        Args:
            value: Value to check
            name: Field name used in the error message

        Returns:
            True if valid

        Raises:
            ValidationError: If the value is not a positive integer
        """
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ValidationError(f"{name} must be an integer, got {type(value).__name__}")
        if value < 1:
            raise ValidationError(f"{name} must be >= 1, got {value}")
        return True

    @staticmethod
    def validate_non_negative(value: float, name: str) -> bool:
        """
        Validate that a scalar is finite and >= 0.

        Raises:
            ValidationError: If the value is negative or not finite
        """
        if not math.isfinite(float(value)):
            raise ValidationError(f"{name} must be finite, got {value}")
        if value < 0:
            raise ValidationError(f"{name} must be non-negative, got {value}")
        return True

    @staticmethod
    def validate_positive(value: float, name: str) -> bool:
        """Validate that a scalar is finite and strictly positive."""
        if not math.isfinite(float(value)) or value <= 0:
            raise ValidationError(f"{name} must be positive, got {value}")
        return True

    @staticmethod
    def validate_open_unit(value: float, name: str) -> bool:
        """Validate that a scalar lies strictly inside (0, 1)."""
        if not (0.0 < float(value) < 1.0):
            raise ValidationError(f"{name} must lie in (0, 1), got {value}")
        return True

    @staticmethod
    def validate_finite_array(array: np.ndarray, name: str, ndim: Optional[int] = None) -> bool:
        """
        Validate a dense array.

        Args:
            array: Array to check
            name: Field name used in the error message
            ndim: Required number of dimensions, if any

        Returns:
            True if valid

        Raises:
            ValidationError: If the array has the wrong rank, is empty or
                holds non-finite entries
        """
        if not isinstance(array, np.ndarray):
            raise ValidationError(f"{name} must be a numpy array, got {type(array).__name__}")
        if ndim is not None and array.ndim != ndim:
            raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
        if array.size == 0:
            raise ValidationError(f"{name} must not be empty")
        if not np.all(np.isfinite(array)):
            raise ValidationError(f"{name} contains non-finite entries")
        return True

    @staticmethod
    def validate_dimension_match(expected: int, actual: int, name: str) -> bool:
        """Validate that two dimensions agree."""
        if expected != actual:
            raise ValidationError(f"Dimension mismatch for {name}: expected {expected}, got {actual}")
        return True

    @staticmethod
    def validate_index(index: int, size: int, name: str) -> bool:
        """Validate that ``index`` addresses one of ``size`` entries."""
        if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
            raise ValidationError(f"{name} must be an integer index")
        if not 0 <= index < size:
            raise ValidationError(f"{name} {index} out of range [0, {size})")
        return True

    @staticmethod
    def validate_choice(value: str, choices: Sequence[str], name: str) -> bool:
        """Validate that a string is one of the allowed options."""
        if value not in choices:
            raise ValidationError(f"{name} must be one of {list(choices)}, got {value!r}")
        return True
