"""Principal-branch Lambert W on the non-negative reals.

This is the numeric kernel behind the closed-form price formulas: the value
``w = lambert_w0(y)`` satisfies ``w * exp(w) == y`` to within
``1e-12 * max(1, y)``.
"""

from __future__ import annotations

import math

_MAX_ITER = 50


def lambert_w0(y: float) -> float:
    """The unique w >= 0 with ``w * exp(w) = y``, for finite y >= 0.

    Halley's iteration from a logarithmic initial guess (``log1p(y)`` for
    small arguments, ``log(y) - log(log(y))`` above e). Convergence is cubic;
    iteration stops once the step drops below ``1e-15 * (1 + |w|)``.
    """
    if isinstance(y, bool) or not isinstance(y, (int, float)):
        raise ValueError("lambert_w0 expects a real number")
    y = float(y)
    if not math.isfinite(y) or y < 0.0:
        raise ValueError(f"lambert_w0 requires a finite argument >= 0, got {y}")
    if y == 0.0:
        return 0.0
    w = math.log1p(y) if y <= math.e else math.log(y) - math.log(math.log(y))
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        err = w * ew - y
        wp1 = w + 1.0
        step = err / (ew * wp1 - (w + 2.0) * err / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w0_derivative(y: float) -> float:
    """d/dy of the principal branch, ``W(y) / (y * (1 + W(y)))``, for y > 0."""
    if isinstance(y, bool) or not isinstance(y, (int, float)):
        raise ValueError("lambert_w0_derivative expects a real number")
    y = float(y)
    if not math.isfinite(y) or y <= 0.0:
        raise ValueError(f"lambert_w0_derivative requires a finite argument > 0, got {y}")
    w = lambert_w0(y)
    return w / (y * (1.0 + w))
