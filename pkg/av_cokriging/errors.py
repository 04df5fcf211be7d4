# av_cokriging/errors.py
from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3


class CoKrigingError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = EXIT_INVALID_INPUT


class InvalidArgumentError(CoKrigingError, ValueError):
    exit_code = EXIT_INVALID_INPUT


class DuplicatePointError(InvalidArgumentError):
    def __init__(self, message: str, *, index: Optional[int] = None, other: Optional[int] = None):
        super().__init__(message)
        self.index = index
        self.other = other


class NestingViolationError(InvalidArgumentError):
    """A point of level t is missing from level t-1."""

    def __init__(self, level: int, point_index: int, point: Sequence[float], message: Optional[str] = None):
        coords = ", ".join(f"{c:g}" for c in point)
        super().__init__(
            message
            or f"nesting violation at level {level}: point {point_index} ({coords}) "
            f"is not observed at level {level - 1}"
        )
        self.level = level
        self.point_index = point_index
        self.point = tuple(float(c) for c in point)


class NumericalSingularityError(CoKrigingError):
    exit_code = EXIT_NUMERICAL


class FittingFailureError(CoKrigingError):
    exit_code = EXIT_NUMERICAL

    def __init__(
        self,
        message: str,
        *,
        diagnostics: Optional[List[Dict[str, Any]]] = None,
        layer: Optional[int] = None,
    ):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.diagnostics = diagnostics or []
        self.layer = layer
