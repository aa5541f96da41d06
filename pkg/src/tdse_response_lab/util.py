"""Utility functions for the TDSE response lab.

This module provides input validation and small formatting helpers
shared by the numerical modules and the batch front end.
"""

import math
import re
from collections import deque
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Any, TypeVar

import numpy as np

from .exceptions import GridMismatchError, ValidationError


class ValidationUtils:
    """Input validation utilities."""

    @staticmethod
    def require_finite_scalar(value: Any, field: str) -> float:
        """Return value as a float, rejecting NaN and infinities."""
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{field} must be a real number, got {value!r}", field, value)
        if not math.isfinite(number):
            raise ValidationError(f"{field} must be finite, got {value!r}", field, value)
        return number

    @staticmethod
    def require_finite_array(values: np.ndarray, field: str) -> None:
        """Reject arrays holding NaN or infinite entries."""
        if not np.all(np.isfinite(values)):
            bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
            raise ValidationError(f"{field} has {bad} non-finite entries", field)

    @staticmethod
    def require_real_array(values: np.ndarray, field: str) -> np.ndarray:
        """Return a float64 view of values, rejecting genuinely complex data."""
        array = np.asarray(values)
        if np.iscomplexobj(array):
            if np.any(array.imag != 0):
                raise ValidationError(f"{field} must be real-valued", field)
            array = array.real
        return np.asarray(array, dtype=np.float64)

    @staticmethod
    def require_same_grid(left: Any, right: Any, what: str = "operands") -> None:
        """Reject operands whose grids differ."""
        if left != right:
            raise GridMismatchError(f"{what} live on different grids: {left} vs {right}", "grid")

    @staticmethod
    def parse_scalar(text: str) -> int | float | str:
        """Parse a command-line value into int, float or string."""
        text = text.strip()
        for convert in (int, float):
            try:
                return convert(text)
            except ValueError:
                continue
        return text

    @staticmethod
    def sanitize_filename(filename: str) -> str:
        """Sanitize filename for safe usage."""
        # Remove or replace dangerous characters
        sanitized = re.sub(r'[<>:"/\\|?*\s]', "_", filename)

        # Remove control characters
        sanitized = re.sub(r"[\x00-\x1f\x7f]", "", sanitized)

        # Limit length
        if len(sanitized) > 255:
            sanitized = sanitized[:255]

        return sanitized.strip() or "_"


T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    function: Callable[[T], R], items: Iterable[T], max_workers: int = 1
) -> Iterator[R]:
    """Map function over items, yielding results in submission order.

    With more than one worker a thread pool keeps at most 2 * max_workers
    calls in flight, so large per-item results are consumed as they arrive.
    """
    if max_workers <= 1:
        for item in items:
            yield function(item)
        return

    pending: deque[Future[R]] = deque()
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        for item in items:
            pending.append(executor.submit(function, item))
            if len(pending) >= 2 * max_workers:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
