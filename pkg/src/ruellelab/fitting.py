"""Log-linear regression helpers."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .errors import DegenerateSystemError


@dataclass(frozen=True)
class GeometricFit:
    """``values[n] ~ C rate^n`` fitted on the points that were kept."""

    rate: float
    r2: float
    n: np.ndarray
    values: np.ndarray


def geometric_fit(n, values, floor=0.0):
    """Least-squares fit of ``log values`` against ``n``, ignoring values at or below ``floor``."""
    n = np.asarray(n, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if keep.sum() < 3:
        raise DegenerateSystemError("fewer than three usable points for a geometric fit")
    fit = linregress(n[keep], np.log(values[keep]))
    return GeometricFit(float(np.exp(fit.slope)), float(fit.rvalue ** 2), n[keep], values[keep])


def power_fit(x, y):
    """Exponent and r^2 of ``y ~ C x^p`` in log-log coordinates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 3:
        raise DegenerateSystemError("fewer than three usable points for a power fit")
    fit = linregress(np.log(x[keep]), np.log(y[keep]))
    return float(fit.slope), float(fit.rvalue ** 2)
