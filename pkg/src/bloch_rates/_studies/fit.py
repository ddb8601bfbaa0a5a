"""Log-log slope fits and the pass criteria built on them."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import linregress

from bloch_rates._types.results import SlopeFit
from bloch_rates._util.error import StudyError

MIN_FIT_POINTS = 3


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Fit ``log y = slope log x + intercept``.

    Raises:
        StudyError: With fewer than three points, or a nonpositive value.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("x and y must have the same length.")
    if xs.size < MIN_FIT_POINTS:
        raise StudyError(
            f"a slope needs at least {MIN_FIT_POINTS} points, got {xs.size}."
        )
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise StudyError("log-log fit needs positive finite values.")
    fit = linregress(np.log(xs), np.log(ys))
    return SlopeFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        points=int(xs.size),
    )


def within_band(fit: SlopeFit | None, expected: float, tolerance: float) -> bool:
    return fit is not None and abs(fit.slope - expected) <= tolerance


def at_least(fit: SlopeFit | None, expected: float, tolerance: float) -> bool:
    """Slope no smaller than ``expected - tolerance``; for exponents that only bound the error."""
    return fit is not None and fit.slope >= expected - tolerance


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def endpoint_exponent(eps: Sequence[float], errors: Sequence[float]) -> float:
    """Effective exponent between the first and last grid points."""
    return float(
        np.log(errors[0] / errors[-1]) / np.log(eps[0] / eps[-1])
    )


def fallback_passes(
    eps: Sequence[float],
    errors: Sequence[float],
    expected: float,
    bound_only: bool = False,
) -> bool:
    """Strict decrease along the grid and an endpoint exponent in ``[0.5, 1.5] * expected``.

    With ``bound_only`` the endpoint exponent only has to reach ``0.5 * expected``.
    """
    if len(errors) < 2 or any(e <= 0 for e in errors):
        return False
    if not strictly_decreasing(errors):
        return False
    exponent = endpoint_exponent(eps, errors)
    if bound_only:
        return exponent >= 0.5 * expected
    low, high = sorted((0.5 * expected, 1.5 * expected))
    return low <= exponent <= high
