"""Discretised transfer operators ``L_v`` and normalised quotients ``P_u^v``.

Grid functions are float arrays of length ``N`` sampled at ``j/N``.  A letter
operator evaluates ``sum_y e^{phi_i(y)} f(y)`` at every node, with ``y``
running over the exact analytic preimages and ``f`` interpolated there.  The
preimages and weights are computed once per ``(letter, N, scheme)`` and
cached on the system as a fixed-width stencil table.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .dynamics import as_word, preimage_arrays
from .errors import NumericalGuardError
from .grid import SCHEMES, circle_distance, circle_nodes, circle_stencil, interpolate

DEFAULT_N = 1024


def letter_operator(sys, i, N, scheme="linear"):
    """Stencil table ``(J, C)`` of ``L_i`` on the ``N``-point grid."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown interpolation scheme {scheme!r}")
    key = ("letter", i, N, scheme)
    tab = sys._tables.get(key)
    if tab is None:
        T = sys.maps[i - 1]
        x = circle_nodes(N)
        ys = np.array([T.inverse(x, j) for j in range(T.branches)])
        w = np.exp(sys.potentials[i - 1](ys))
        cols, coef = circle_stencil(ys, N, scheme)
        J = np.ascontiguousarray(cols.transpose(1, 0, 2).reshape(N, -1), dtype=np.int64)
        C = np.ascontiguousarray((coef * w[..., None]).transpose(1, 0, 2).reshape(N, -1))
        tab = (J, C)
        sys._tables[key] = tab
    return tab


def word_tables(sys, N, scheme="linear"):
    """All letter tables stacked into ``(k, N, K)`` arrays, zero padded."""
    key = ("stack", N, scheme)
    tab = sys._tables.get(key)
    if tab is None:
        parts = [letter_operator(sys, i, N, scheme) for i in range(1, sys.k + 1)]
        K = max(J.shape[1] for J, _ in parts)
        Jall = np.zeros((sys.k, N, K), dtype=np.int64)
        Call = np.zeros((sys.k, N, K))
        for n, (J, C) in enumerate(parts):
            Jall[n, :, :J.shape[1]] = J
            Call[n, :, :C.shape[1]] = C
        tab = (Jall, Call)
        sys._tables[key] = tab
    return tab


def letter_indices(v):
    """Zero-based letter array for the kernels."""
    return np.array([c - 1 for c in as_word(v)], dtype=np.int64)


def _grid_values(f, N=None):
    if callable(f):
        x = circle_nodes(N or DEFAULT_N)
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()
    return np.ascontiguousarray(f, dtype=float)


def apply_letter(sys, i, f, scheme="linear"):
    """``L_i f`` at the grid nodes."""
    f = _grid_values(f)
    J, C = letter_operator(sys, i, len(f), scheme)
    return kernels.ell_pull(J, C, f)


def apply_word(sys, v, f, scheme="linear"):
    """``L_v f``, applying the letters of ``v`` left to right."""
    f = _grid_values(f)
    Jall, Call = word_tables(sys, len(f), scheme)
    out, _ = kernels.word_pull(Jall, Call, letter_indices(v), f, False)
    if not np.all(np.isfinite(out)):
        raise NumericalGuardError("overflow in apply_word; use apply_word_log")
    return out


def apply_word_log(sys, v, f, scheme="linear"):
    """``L_v f`` as ``(g, s)`` with ``L_v f = e^s g`` and ``max|g| = 1``."""
    f = _grid_values(f)
    Jall, Call = word_tables(sys, len(f), scheme)
    m = np.max(np.abs(f))
    if m == 0:
        return np.zeros_like(f), -np.inf
    out, s = kernels.word_pull(Jall, Call, letter_indices(v), f / m, True)
    return out, s + np.log(m)


def normalized_ones(sys, u, N, scheme="linear"):
    """``L_u(1)`` scaled to unit sup norm."""
    if len(as_word(u)) == 0:
        return np.ones(N)
    g, _ = apply_word_log(sys, u, np.ones(N), scheme)
    return g


def normalized_quotient(sys, u, v, f, scheme="linear"):
    """``P_u^v f = L_v(f L_u 1) / L_{uv} 1``.

    Evaluated one letter at a time through ``P_{u[v]_j}^{v_{j+1}}``, with
    the weights renormalised at every step, so arbitrarily long words are
    safe from overflow.
    """
    f = _grid_values(f)
    g = normalized_ones(sys, u, len(f), scheme)
    Jall, Call = word_tables(sys, len(f), scheme)
    F, _, ok = kernels.quotient_pull(Jall, Call, letter_indices(v), f, g)
    if not ok:
        raise NumericalGuardError("nonpositive L_{uv}(1); the system definition is broken")
    return F


def quotient_weights(sys, u, v, N, scheme="linear"):
    """Normalised ``L_{u[v]_j}(1)`` for ``j = 0..|v|``, shape ``(|v|+1, N)``."""
    g = normalized_ones(sys, u, N, scheme)
    Jall, Call = word_tables(sys, N, scheme)
    G, logs = kernels.normalized_orbit(Jall, Call, letter_indices(v), g)
    return G, logs


def comparability_ratio(sys, v, N=DEFAULT_N, scheme="linear"):
    """``max L_v(1) / min L_v(1)`` over the grid."""
    g = normalized_ones(sys, v, N, scheme)
    if np.min(g) <= 0:
        raise NumericalGuardError("L_v(1) is not positive")
    return float(np.max(g) / np.min(g))


def assemble_matrix(sys, v, N, scheme="linear"):
    """Dense ``N x N`` matrix of ``L_v`` (row ``i`` evaluates at node ``i``)."""
    M = np.eye(N)
    for c in as_word(v):
        J, C = letter_operator(sys, c, N, scheme)
        A = np.zeros((N, N))
        np.add.at(A, (np.repeat(np.arange(N), J.shape[1]), J.ravel()), C.ravel())
        M = A @ M
    return M


def brute_force_apply(sys, v, f, x, scheme="linear"):
    """``L_v f`` at points ``x`` by explicit preimage enumeration.

    ``f`` is either a callable, evaluated exactly at the preimages, or grid
    values, interpolated there with ``scheme``.
    """
    ys, phis = preimage_arrays(sys, v, x)
    if callable(f):
        vals = np.asarray(f(ys), dtype=float)
    else:
        vals = interpolate(f, ys, scheme)
    return np.sum(np.exp(phis) * vals, axis=0)


# -- Holder bookkeeping ----------------------------------------------------

@dataclass(frozen=True)
class HolderSeminorms:
    """Grid estimates of the seminorms of a function.

    All values are maxima over grid pairs, hence lower bounds of the true
    seminorms.
    """

    sup_norm: float
    osc: float
    D_alpha: float
    D_alpha_loc: float
    D_bar: float


def _offset_ratios(f, offsets, alpha, stride=1):
    N = len(f)
    best = 0.0
    sub = f[::stride]
    for k in offsets:
        if stride == 1:
            diff = np.abs(f - np.roll(f, -k))
        else:
            diff = np.abs(sub - np.roll(sub, -(k // stride)))
        d = min(k, N - k) / N
        best = max(best, float(diff.max()) / d ** alpha)
    return best


def holder_seminorms(mc, f, max_pairs_n=512):
    """Sup norm, oscillation, ``D_alpha``, local ``D_alpha`` and ``D_bar``.

    Every pair is used when ``N <= max_pairs_n``.  For larger grids the
    global coefficient uses a strided node subsample, while the local
    coefficient (pairs closer than ``Delta^(-1/alpha)``) always uses every
    pair.
    """
    f = np.asarray(f, dtype=float)
    N = len(f)
    alpha = mc.alpha
    sup = float(np.max(np.abs(f)))
    osc = float(np.ptp(f))
    n_loc = int(np.ceil(mc.local_radius * N)) - 1
    local = range(1, min(n_loc, N // 2) + 1)
    D_loc = _offset_ratios(f, local, alpha)
    if N <= max_pairs_n:
        D = _offset_ratios(f, range(1, N // 2 + 1), alpha)
    else:
        stride = int(np.ceil(N / max_pairs_n))
        while N % stride:
            stride += 1
        D = _offset_ratios(f, range(stride, N // 2 + 1, stride), alpha, stride)
        D = max(D, D_loc, _offset_ratios(f, range(1, stride), alpha))
    return HolderSeminorms(sup, osc, max(D, D_loc), D_loc, max(osc, D_loc / mc.Delta))


def doeblin_fortet_ratio(sys, mc, u, v, f, scheme="linear"):
    """Largest ratio of ``|P f(x) - P f(y)|`` to its Lasota-Yorke bound.

    The bound is ``C_phi (2 |f| + lam^|v| D_alpha(f)) d(x, y)^alpha`` over
    grid pairs with ``d(x, y) < a``; a value at most 1 means the bound held.
    """
    f = np.asarray(f, dtype=float)
    N = len(f)
    Pf = normalized_quotient(sys, u, v, f, scheme)
    semi = holder_seminorms(mc, f)
    scale = mc.C_phi * (2 * semi.sup_norm + mc.lam ** len(as_word(v)) * semi.D_alpha)
    worst = 0.0
    for k in range(1, int(np.ceil(mc.a * N))):
        d = circle_distance(0.0, k / N)
        if d >= mc.a:
            break
        diff = np.abs(Pf - np.roll(Pf, -k)).max()
        worst = max(worst, float(diff / (scale * d ** mc.alpha)))
    return worst
