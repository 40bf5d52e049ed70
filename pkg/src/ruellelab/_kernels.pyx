# Compiled inner loops for letter operators stored as fixed-width stencils.
#
# A letter operator on an N-point grid is held as two (N, K) arrays: column
# indices J and coefficients C, so that (L f)[i] = sum_k C[i, k] f[J[i, k]].
# Words are handled by stacking the per-letter tables into (k, N, K) arrays
# padded with zero coefficients.

import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef inline void _pull(const idx_t[:, ::1] J, const double[:, ::1] C,
                       const double[::1] f, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = J.shape[0], K = J.shape[1]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(K):
            acc += C[i, k] * f[J[i, k]]
        out[i] = acc


cdef inline void _push(const idx_t[:, ::1] J, const double[:, ::1] C,
                       const double[::1] mu, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = J.shape[0], K = J.shape[1]
    cdef double m
    for i in range(out.shape[0]):
        out[i] = 0.0
    for i in range(n):
        m = mu[i]
        if m == 0.0:
            continue
        for k in range(K):
            out[J[i, k]] += C[i, k] * m


cdef inline double _absmax(const double[::1] v) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = 0.0, a
    for i in range(v.shape[0]):
        a = fabs(v[i])
        if a > m:
            m = a
    return m


def ell_pull(const idx_t[:, ::1] J, const double[:, ::1] C, const double[::1] f):
    """Gather ``out[i] = sum_k C[i, k] f[J[i, k]]``."""
    out = np.empty(J.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        _pull(J, C, f, o)
    return out


def ell_push(const idx_t[:, ::1] J, const double[:, ::1] C, const double[::1] mu,
             Py_ssize_t n_out):
    """Scatter, the exact transpose of :func:`ell_pull`."""
    out = np.empty(n_out, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        _push(J, C, mu, o)
    return out


def word_pull(const idx_t[:, :, ::1] J, const double[:, :, ::1] C,
              const idx_t[::1] letters, const double[::1] f, bint renorm):
    """Apply letters left to right, optionally renormalising by the sup norm.

    Returns the final function and the accumulated log scale.
    """
    cdef Py_ssize_t n = f.shape[0], j, i
    cdef double logscale = 0.0, m
    a = np.array(f, dtype=np.float64, copy=True)
    b = np.empty(n, dtype=np.float64)
    cdef double[::1] x = a
    cdef double[::1] y = b
    cdef double[::1] t
    with nogil:
        for j in range(letters.shape[0]):
            _pull(J[letters[j]], C[letters[j]], x, y)
            t = x
            x = y
            y = t
            if renorm:
                m = _absmax(x)
                if m > 0.0:
                    logscale += log(m)
                    for i in range(n):
                        x[i] /= m
    return np.asarray(x).copy(), logscale


def normalized_orbit(const idx_t[:, :, ::1] J, const double[:, :, ::1] C,
                     const idx_t[::1] letters, const double[::1] g0):
    """Sup-normalised iterates ``G[j] ~ L_{[v]_j}(g0)`` with their log scales."""
    cdef Py_ssize_t n = g0.shape[0], L = letters.shape[0], j, i
    cdef double m
    G = np.empty((L + 1, n), dtype=np.float64)
    logs = np.zeros(L + 1, dtype=np.float64)
    cdef double[:, ::1] Gv = G
    cdef double[::1] lv = logs
    with nogil:
        m = _absmax(g0)
        for i in range(n):
            Gv[0, i] = g0[i] / m
        lv[0] = log(m)
        for j in range(L):
            _pull(J[letters[j]], C[letters[j]], Gv[j], Gv[j + 1])
            m = _absmax(Gv[j + 1])
            for i in range(n):
                Gv[j + 1, i] /= m
            lv[j + 1] = lv[j] + log(m)
    return G, logs


def quotient_pull(const idx_t[:, :, ::1] J, const double[:, :, ::1] C,
                  const idx_t[::1] letters, const double[::1] f,
                  const double[::1] g):
    """Normalised quotient along a word, one letter at a time.

    With ``g`` proportional to ``L_u(1)`` this returns ``P_u^v(f)`` together
    with the normalised ``L_{uv}(1)``.  The third return value is False when
    a nonpositive denominator was met.
    """
    cdef Py_ssize_t n = f.shape[0], j, i
    cdef double m
    cdef bint ok = True
    F = np.array(f, dtype=np.float64, copy=True)
    Gc = np.array(g, dtype=np.float64, copy=True)
    tmp = np.empty(n, dtype=np.float64)
    num = np.empty(n, dtype=np.float64)
    den = np.empty(n, dtype=np.float64)
    cdef double[::1] Fv = F, gv = Gc, tv = tmp, nv = num, dv = den
    with nogil:
        for j in range(letters.shape[0]):
            for i in range(n):
                tv[i] = Fv[i] * gv[i]
            _pull(J[letters[j]], C[letters[j]], tv, nv)
            _pull(J[letters[j]], C[letters[j]], gv, dv)
            m = 0.0
            for i in range(n):
                if dv[i] <= 0.0:
                    ok = False
                Fv[i] = nv[i] / dv[i]
                if dv[i] > m:
                    m = dv[i]
            for i in range(n):
                gv[i] = dv[i] / m
    return F, Gc, ok


def quotient_push(const idx_t[:, :, ::1] J, const double[:, :, ::1] C,
                  const idx_t[::1] letters, const double[:, ::1] G,
                  const double[::1] mu):
    """Transpose of :func:`quotient_pull`.

    ``G[j]`` must be proportional to the weight in force before letter ``j``
    (as produced by :func:`normalized_orbit`).  Letters are consumed last to
    first, as duality requires.
    """
    cdef Py_ssize_t n = mu.shape[0], j, i
    nu = np.array(mu, dtype=np.float64, copy=True)
    den = np.empty(n, dtype=np.float64)
    tmp = np.empty(n, dtype=np.float64)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] nv = nu, dv = den, tv = tmp, ov = out
    with nogil:
        for j in range(letters.shape[0] - 1, -1, -1):
            _pull(J[letters[j]], C[letters[j]], G[j], dv)
            for i in range(n):
                tv[i] = nv[i] / dv[i]
            _push(J[letters[j]], C[letters[j]], tv, ov)
            for i in range(n):
                nv[i] = ov[i] * G[j, i]
    return nu
