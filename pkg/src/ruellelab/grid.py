"""Uniform grids and interpolation stencils.

Grid functions and grid measures are plain float arrays.  On the circle the
nodes are ``j/N`` for ``j = 0..N-1``; on the interval they are
``linspace(0, 1, N)``.

Two interpolation schemes are available.  ``"linear"`` is the default: it is
positivity preserving and its transpose is the proportional two-node split
used to bin atoms, so primal and dual operators are exact transposes.
``"cubic"`` is four-point Lagrange interpolation, used where operator
accuracy matters more than positivity.
"""

import numpy as np

SCHEMES = ("linear", "cubic")


def circle_nodes(N):
    return np.arange(N) / N


def interval_nodes(N):
    return np.linspace(0.0, 1.0, N)


def circle_distance(x, y):
    """Arc distance on R/Z."""
    d = np.abs(np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 1.0))
    return np.minimum(d, 1.0 - d)


def _lagrange4(t):
    # weights for nodes at offsets -1, 0, 1, 2 evaluated at offset t
    return np.stack([
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ], axis=-1)


def circle_stencil(y, N, scheme="linear"):
    """Interpolation stencil for periodic data sampled at ``j/N``.

    Returns ``(cols, coef)`` with trailing axis of width 2 or 4 so that the
    interpolant at ``y`` is ``sum(coef * f[cols], axis=-1)``.
    """
    u = np.mod(np.asarray(y, dtype=float), 1.0) * N
    base = np.floor(u)
    t = u - base
    i0 = base.astype(np.int64) % N
    if scheme == "linear":
        cols = np.stack([i0, (i0 + 1) % N], axis=-1)
        coef = np.stack([1.0 - t, t], axis=-1)
    elif scheme == "cubic":
        cols = np.stack([(i0 + s) % N for s in (-1, 0, 1, 2)], axis=-1)
        coef = _lagrange4(t)
    else:
        raise ValueError(f"unknown interpolation scheme {scheme!r}")
    return cols, coef


def interval_stencil(y, N, scheme="linear"):
    """Interpolation stencil for data sampled at ``linspace(0, 1, N)``."""
    u = np.clip(np.asarray(y, dtype=float), 0.0, 1.0) * (N - 1)
    if scheme == "linear":
        i0 = np.minimum(np.floor(u).astype(np.int64), N - 2)
        t = u - i0
        cols = np.stack([i0, i0 + 1], axis=-1)
        coef = np.stack([1.0 - t, t], axis=-1)
    elif scheme == "cubic":
        b = np.clip(np.floor(u).astype(np.int64) - 1, 0, N - 4)
        t = u - b - 1.0
        cols = np.stack([b + s for s in range(4)], axis=-1)
        coef = _lagrange4(t)
    else:
        raise ValueError(f"unknown interpolation scheme {scheme!r}")
    return cols, coef


def interpolate(values, y, scheme="linear", periodic=True):
    """Evaluate grid data at arbitrary points."""
    values = np.asarray(values, dtype=float)
    stencil = circle_stencil if periodic else interval_stencil
    cols, coef = stencil(y, len(values), scheme)
    return np.sum(coef * values[cols], axis=-1)


def sample(func, N):
    """Sample a callable on the circle grid."""
    x = circle_nodes(N)
    return np.broadcast_to(np.asarray(func(x), dtype=float), x.shape).copy()


def bin_atoms(x, w, N):
    """Proportional two-node split of atoms onto the circle grid.

    Mean-preserving, and the exact transpose of linear interpolation.
    """
    cols, coef = circle_stencil(x, N, "linear")
    return np.bincount(cols.ravel(), weights=(coef * np.asarray(w, dtype=float)[..., None]).ravel(),
                       minlength=N)


def dirac(N, x=0.0):
    """Unit atom at ``x`` binned onto the grid."""
    return bin_atoms(np.array([x]), np.array([1.0]), N)


def lebesgue(N):
    return np.full(N, 1.0 / N)
