"""Exceptions and small argument checks shared across the package."""

from __future__ import annotations

import math


class ParameterError(ValueError):
    """Invalid model, truncation or run parameters."""


class DomainError(ValueError):
    """Argument outside the region where a quantity is defined."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its tolerance."""


class DegenerateTruncationError(ParameterError):
    """The truncation event has (numerically) vanishing probability."""


class ResourceError(RuntimeError):
    """The requested computation would exceed a size guard."""


def check_finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name, value, *, allow_inf=False):
    value = float(value)
    if math.isnan(value) or value <= 0 or (math.isinf(value) and not allow_inf):
        raise ParameterError(f"{name} must be > 0, got {value!r}")
    return value


def check_nonnegative(name, value):
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ParameterError(f"{name} must be >= 0, got {value!r}")
    return value


def check_open_unit(name, value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def check_positive_int(name, value):
    if isinstance(value, bool) or int(value) != value or int(value) < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def close_to(a, b, rtol=1e-12):
    """Relative equality used for symbolic boundary detection."""
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))
