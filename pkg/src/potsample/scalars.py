"""Overflow-guarded scalar math used throughout the package.

CPython's ``math.exp``/``math.cosh`` raise ``OverflowError`` instead of
returning ``inf``, and ``0.0 * inf`` is ``nan``; the helpers here keep
IEEE semantics so bound computations can probe infinite endpoints.
"""

from __future__ import annotations

import math

# exp(x) overflows a double just above x = 709.78.
_EXP_MAX = 708.0


def safe_exp(t: float) -> float:
    """exp(t) that saturates to inf instead of raising."""
    if t > _EXP_MAX:
        return math.inf
    return math.exp(t)


def safe_cosh(t: float) -> float:
    """cosh(t) that saturates to inf instead of raising."""
    if t > _EXP_MAX or t < -_EXP_MAX:
        return math.inf
    return math.cosh(t)


def safe_sinh(t: float) -> float:
    """sinh(t) that saturates to +-inf instead of raising."""
    if t > _EXP_MAX:
        return math.inf
    if t < -_EXP_MAX:
        return -math.inf
    return math.sinh(t)


def line_at(slope: float, intercept: float, x: float) -> float:
    """Evaluate slope*x + intercept, with exact limits at x = +-inf."""
    if math.isinf(x):
        if slope == 0.0:
            return intercept
        return math.inf if (slope > 0.0) == (x > 0.0) else -math.inf
    return slope * x + intercept
