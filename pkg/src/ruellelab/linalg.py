"""Power iteration for nonnegative operators."""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalGuardError


@dataclass(frozen=True)
class PerronData:
    value: float
    right: np.ndarray
    left: np.ndarray
    iterations: int
    residual: float


def power_iteration(matvec, x0, tol=1e-14, maxiter=10000):
    """Dominant eigenpair of a nonnegative operator by power iteration.

    Parameters
    ----------
    matvec : callable
        ``x -> A x``.
    x0 : ndarray
        Positive starting vector.

    Returns
    -------
    value, vector, iterations
        The vector is normalised to unit sup norm.
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.max(np.abs(x))
    value = 0.0
    for it in range(1, maxiter + 1):
        y = matvec(x)
        m = np.max(np.abs(y))
        if not np.isfinite(m) or m == 0:
            raise NumericalGuardError("power iteration broke down")
        y = y / m
        if np.max(np.abs(y - x)) <= tol and abs(m - value) <= tol * m:
            return m, y, it
        x, value = y, m
    raise NumericalGuardError(f"power iteration did not converge in {maxiter} steps")


def perron(M, tol=1e-14, maxiter=10000):
    """Perron value with right and left eigenvectors of a dense nonnegative matrix.

    The left vector is a probability vector and the right vector is scaled
    so that ``left @ right == 1``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    value, right, it1 = power_iteration(lambda x: M @ x, np.ones(n), tol, maxiter)
    _, left, it2 = power_iteration(lambda x: x @ M, np.ones(n), tol, maxiter)
    left = left / left.sum()
    right = right / (left @ right)
    residual = float(np.max(np.abs(M @ right - value * right)))
    return PerronData(float(value), right, left, max(it1, it2), residual)
