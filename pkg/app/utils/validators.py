"""
Input Validators - Range and shape checks shared by the config dataclasses
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def validate_positive(name: str, value: float) -> Tuple[bool, Optional[str]]:
    """
    Validate a strictly positive number

    Examples:
        >>> validate_positive("sample_rate", 16000)
        (True, None)
        >>> validate_positive("sample_rate", 0)
        (False, 'sample_rate must be > 0, got 0')
    """
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        return False, f"{name} must be a finite number, got {value!r}"

    if value <= 0:
        return False, f"{name} must be > 0, got {value}"

    return True, None


def validate_range(
    name: str,
    value: float,
    low: float,
    high: float,
    low_inclusive: bool = True,
    high_inclusive: bool = True
) -> Tuple[bool, Optional[str]]:
    """
    Validate that a number lies in an interval

    Args:
        name: Field name used in the message
        value: Value to check
        low: Lower bound
        high: Upper bound
        low_inclusive: Whether ``low`` itself is allowed
        high_inclusive: Whether ``high`` itself is allowed

    Returns:
        Tuple of (is_valid, error_message)

    Examples:
        >>> validate_range("alpha", 0.5, 0.0, 1.0)
        (True, None)
        >>> validate_range("s", 0.0, 0.0, 1.0, low_inclusive=False)[0]
        False
    """
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        return False, f"{name} must be a finite number, got {value!r}"

    low_ok = value >= low if low_inclusive else value > low
    high_ok = value <= high if high_inclusive else value < high

    if not (low_ok and high_ok):
        lb = '[' if low_inclusive else '('
        rb = ']' if high_inclusive else ')'
        return False, f"{name} must be in {lb}{low}, {high}{rb}, got {value}"

    return True, None


def validate_count(name: str, value: int, minimum: int = 1) -> Tuple[bool, Optional[str]]:
    """Validate an integer count with a lower bound"""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        return False, f"{name} must be an integer, got {value!r}"

    if value < minimum:
        return False, f"{name} must be >= {minimum}, got {value}"

    return True, None


def validate_interval(name: str, bounds: Sequence[float]) -> Tuple[bool, Optional[str]]:
    """Validate a [low, high] pair with low <= high"""
    if len(bounds) != 2:
        return False, f"{name} must have exactly two elements"

    low, high = bounds
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in (low, high)):
        return False, f"{name} bounds must be finite numbers"

    if low > high:
        return False, f"{name} requires low <= high, got [{low}, {high}]"

    return True, None


def validate_finite(name: str, values: np.ndarray) -> Tuple[bool, Optional[str]]:
    """Validate that an array has only finite entries"""
    if not np.all(np.isfinite(values)):
        return False, f"{name} contains non-finite values"

    return True, None


def first_error(*results: Tuple[bool, Optional[str]]) -> Optional[str]:
    """
    Return the first error message of a batch of validation results

    Examples:
        >>> first_error((True, None), (False, "bad"), (False, "worse"))
        'bad'
    """
    for is_valid, message in results:
        if not is_valid:
            return message

    return None
