"""Pure numpy versions of the compiled stencil kernels.

Signatures and semantics match ``_kernels.pyx`` exactly, so either module
can back :mod:`ruellelab._backend`.
"""

import numpy as np


def ell_pull(J, C, f):
    return np.einsum("ik,ik->i", C, np.asarray(f)[J])


def ell_push(J, C, mu, n_out):
    w = (C * np.asarray(mu)[:, None]).ravel()
    return np.bincount(J.ravel(), weights=w, minlength=n_out)


def word_pull(J, C, letters, f, renorm):
    x = np.array(f, dtype=np.float64, copy=True)
    logscale = 0.0
    for c in letters:
        x = ell_pull(J[c], C[c], x)
        if renorm:
            m = np.max(np.abs(x))
            if m > 0.0:
                logscale += np.log(m)
                x /= m
    return x, logscale


def normalized_orbit(J, C, letters, g0):
    L = len(letters)
    G = np.empty((L + 1, len(g0)))
    logs = np.zeros(L + 1)
    m = np.max(np.abs(g0))
    G[0] = g0 / m
    logs[0] = np.log(m)
    for j, c in enumerate(letters):
        y = ell_pull(J[c], C[c], G[j])
        m = np.max(np.abs(y))
        G[j + 1] = y / m
        logs[j + 1] = logs[j] + np.log(m)
    return G, logs


def quotient_pull(J, C, letters, f, g):
    F = np.array(f, dtype=np.float64, copy=True)
    g = np.array(g, dtype=np.float64, copy=True)
    ok = True
    for c in letters:
        num = ell_pull(J[c], C[c], F * g)
        den = ell_pull(J[c], C[c], g)
        if np.any(den <= 0.0):
            ok = False
        with np.errstate(divide="ignore", invalid="ignore"):
            F = num / den
        g = den / np.max(den)
    return F, g, ok


def quotient_push(J, C, letters, G, mu):
    nu = np.array(mu, dtype=np.float64, copy=True)
    n = len(nu)
    for j in range(len(letters) - 1, -1, -1):
        c = letters[j]
        den = ell_pull(J[c], C[c], G[j])
        nu = ell_push(J[c], C[c], nu / den, n) * G[j]
    return nu
