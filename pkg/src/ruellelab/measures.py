"""Grid measures, Wasserstein distances and dual operator iteration.

A grid measure is a nonnegative float array of length ``N`` carrying the
masses of the nodes ``j/N``.  The dual of ``P_u^v`` is applied as the exact
transpose of the discrete quotient, which pushes mass to the preimages and
splits each atom proportionally between its two neighbouring nodes.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.stats import linregress

from ._backend import kernels
from .dynamics import apply_word_map, as_word, metric_constants
from .errors import NumericalGuardError
from .grid import circle_distance, circle_nodes, dirac, interpolate
from .transfer import (DEFAULT_N, holder_seminorms, letter_indices, normalized_ones,
                       normalized_quotient, quotient_weights, word_tables)


def is_probability(mu, tol=1e-9):
    mu = np.asarray(mu, dtype=float)
    return bool(np.all(mu >= -tol) and abs(mu.sum() - 1.0) <= tol)


def _require_probability(*mus):
    for mu in mus:
        if not is_probability(mu):
            raise ValueError("expected a probability measure on the grid")


# -- Wasserstein distances ---------------------------------------------------

def circle_w1(xa, wa, xb, wb):
    """Exact ``W_1`` on the circle between two finite atomic measures.

    Uses the cumulative distribution of the difference with the optimal
    cut, which is a weighted median.
    """
    x = np.mod(np.concatenate([np.asarray(xa, float), np.asarray(xb, float)]), 1.0)
    s = np.concatenate([np.asarray(wa, float), -np.asarray(wb, float)])
    order = np.argsort(x, kind="stable")
    x, s = x[order], s[order]
    D = np.cumsum(s)
    gaps = np.diff(np.append(x, x[0] + 1.0))
    keep = gaps > 0
    D, gaps = D[keep], gaps[keep]
    if len(D) == 0:
        return 0.0
    o = np.argsort(D, kind="stable")
    cw = np.cumsum(gaps[o])
    c = D[o][np.searchsorted(cw, 0.5 * cw[-1])]
    return float(np.sum(gaps * np.abs(D - c)))


def transport_dstar(x, s, mc):
    """Exact optimal transport cost for ``d*`` between signed-mass halves.

    ``s`` holds signed masses summing to zero at positions ``x``.  The cost
    ``min(1, Delta d^alpha)`` is the shortest-path metric of a sparse graph:
    local edges between atoms closer than ``Delta^(-1/alpha)`` plus a hub
    reached from every atom at cost 1/2.  The transport problem is therefore
    a min-cost flow on that graph, solved as a sparse linear program.
    """
    x = np.mod(np.asarray(x, float), 1.0)
    s = np.asarray(s, float)
    keep = s != 0
    x, s = x[keep], s[keep]
    pos = s[s > 0].sum()
    neg = -s[s < 0].sum()
    if pos <= 0 or neg <= 0:
        return 0.0
    # the halves balance only up to rounding; rescale each to unit mass
    mass = 0.5 * (pos + neg)
    s = np.where(s > 0, s / pos, s / neg)
    order = np.argsort(x, kind="stable")
    x, s = x[order], s[order]
    n = len(x)
    if n == 1:
        return 0.0
    r = mc.local_radius
    src, dst, cost = [], [], []
    max_offset = 1 if mc.alpha == 1.0 else n - 1
    for k in range(1, max_offset + 1):
        j = (np.arange(n) + k) % n
        d = circle_distance(x, x[j])
        m = d < r
        if k > 1 and not m.any():
            break
        if n == 2 and k == 1:
            m &= np.arange(n) == 0
        src.append(np.arange(n)[m])
        dst.append(j[m])
        cost.append(mc.Delta * d[m] ** mc.alpha)
    hub = n
    src = np.concatenate(src + [np.arange(n)])
    dst = np.concatenate(dst + [np.full(n, hub)])
    cost = np.concatenate(cost + [np.full(n, 0.5)])
    E = len(src)
    tail = np.concatenate([src, dst])
    head = np.concatenate([dst, src])
    c = np.concatenate([cost, cost])
    cols = np.arange(2 * E)
    A = coo_matrix((np.concatenate([np.ones(2 * E), -np.ones(2 * E)]),
                    (np.concatenate([tail, head]), np.concatenate([cols, cols]))),
                   shape=(n + 1, 2 * E)).tocsr()
    b = np.append(s, 0.0)
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericalGuardError(f"transport solver failed: {res.message}")
    return float(res.fun * mass)


def wasserstein(mu, nu, metric="euclid", mc=None, check=True):
    """Wasserstein distance between two grid measures.

    Parameters
    ----------
    metric : {"euclid", "dstar"}
        Arc-length cost, or the truncated cost ``d*`` (needs ``mc``).
    """
    mu = np.asarray(mu, float)
    nu = np.asarray(nu, float)
    if check:
        _require_probability(mu, nu)
    x = circle_nodes(len(mu))
    if metric == "euclid":
        return circle_w1(x, mu, x, nu)
    if metric == "dstar":
        if mc is None:
            raise ValueError("dstar needs MetricConstants")
        return transport_dstar(x, mu - nu, mc)
    raise ValueError(f"unknown metric {metric!r}")


# -- dual operators ----------------------------------------------------------

def dual_apply(sys, u, v, mu, scheme="linear"):
    """``(P_u^v)^* mu``, the exact transpose of :func:`normalized_quotient`."""
    mu = np.ascontiguousarray(mu, dtype=float)
    N = len(mu)
    v = as_word(v)
    G, _ = quotient_weights(sys, u, v, N, scheme)
    Jall, Call = word_tables(sys, N, scheme)
    return kernels.quotient_push(Jall, Call, letter_indices(v), G, mu)


@dataclass(frozen=True)
class QuenchedMeasure:
    """A limit measure computed at finite depth.

    ``gap`` is the ``W-bar`` distance between the depth ``l - 1`` and depth
    ``l`` approximations.  ``density`` is set for bilateral measures and is
    the density with respect to ``mu_omega`` (sup-normalised ``L_u(1)``
    divided by its ``mu_omega``-integral).
    """

    measure: np.ndarray
    u: object
    omega: object
    l: int
    gap: float
    density: np.ndarray = None


def _truncate(omega, l):
    omega = as_word(omega)
    l = len(omega) if l is None else l
    if l > len(omega):
        raise ValueError(f"depth {l} exceeds the supplied environment length {len(omega)}")
    return omega.prefix(l), l


def quenched_conformal(sys, u, omega, l=None, start=None, N=None, scheme="linear",
                       gap=True):
    """``mu_{u, omega}`` as the dual iterate ``(P_u^{[omega]_l})^* nu``.

    The default start ``nu`` is the unit atom at node 0.
    """
    w, l = _truncate(omega, l)
    N = N or (len(start) if start is not None else DEFAULT_N)
    nu = dirac(N, 0.0) if start is None else np.asarray(start, float)
    mu = dual_apply(sys, u, w, nu, scheme)
    g = np.nan
    if gap and l >= 1:
        prev = dual_apply(sys, u, w.prefix(l - 1), nu, scheme)
        g = wasserstein(mu, prev, "dstar", metric_constants(sys), check=scheme == "linear")
    return QuenchedMeasure(mu, as_word(u), w, l, g)


def conformal_functional(sys, u, omega, f, l=None, x0=0.0, N=None, scheme="linear"):
    """``mu_{u, omega}(f)`` evaluated as ``P_u^{[omega]_l}(f)(x0)``."""
    w, l = _truncate(omega, l)
    if callable(f):
        from .grid import sample
        f = sample(f, N or DEFAULT_N)
    Pf = normalized_quotient(sys, u, w, f, scheme)
    return float(interpolate(Pf, np.array([x0]), scheme)[0])


@dataclass(frozen=True)
class EigenData:
    """``lambda_{u,omega} = mu_omega(L_u 1)`` and ``h = L_u(1) / lambda``."""

    lam: float
    log_lam: float
    h: np.ndarray
    mu_omega: np.ndarray


def eigen_data(sys, u, omega, l=None, N=None, scheme="linear", mu_omega=None):
    u = as_word(u)
    if mu_omega is None:
        mu_omega = quenched_conformal(sys, (), omega, l, N=N, scheme=scheme, gap=False).measure
    N = len(mu_omega)
    from .transfer import apply_word_log
    g, s = apply_word_log(sys, u, np.ones(N), scheme)
    integral = float(mu_omega @ g)
    if integral <= 0:
        raise NumericalGuardError("nonpositive eigenvalue estimate")
    log_lam = s + np.log(integral)
    return EigenData(float(np.exp(log_lam)), float(log_lam), g / integral, mu_omega)


def bilateral_equilibrium(sys, sigma_suffix, omega, k=None, l=None, N=None,
                          scheme="linear", gap=True):
    """``mu_{sigma, omega}`` from the last ``k`` letters of ``sigma_suffix``.

    ``sigma_suffix`` lists the past with its last letter adjacent to
    ``omega``.
    """
    sigma = as_word(sigma_suffix)
    k = len(sigma) if k is None else k
    u = sigma.suffix(k)
    qm = quenched_conformal(sys, u, omega, l, N=N, scheme=scheme, gap=gap)
    mu_omega = quenched_conformal(sys, (), omega, l, N=len(qm.measure), scheme=scheme,
                                  gap=False).measure
    g = normalized_ones(sys, u, len(qm.measure), scheme)
    density = g / float(mu_omega @ g)
    return QuenchedMeasure(qm.measure, u, qm.omega, qm.l, qm.gap, density)


def pushforward(sys, u, mu):
    """Atoms of ``mu o T_u^{-1}``: node images under ``T_u`` with the same masses."""
    x = circle_nodes(len(mu))
    return np.asarray(apply_word_map(sys, u, x)), np.asarray(mu, float)


# -- contraction -------------------------------------------------------------

@dataclass(frozen=True)
class ContractionFit:
    """Worst-case contraction ratios per length and their geometric fit."""

    k0_hat: int
    s_hat: float
    r2: float
    lengths: np.ndarray
    worst: np.ndarray
    fit_lengths: np.ndarray


def _random_trig(rng, N, modes=4):
    x = circle_nodes(N)
    f = np.zeros(N)
    for q in range(1, modes + 1):
        f += rng.normal() / q * np.cos(2 * np.pi * (q * x + rng.random()))
    return f


def contraction_ratios(sys, trials, lengths, rng, kind="measure", N=DEFAULT_N, u_max=4):
    """Contraction ratios of ``P_u^{[v]_n}`` for random words and inputs.

    For ``kind="measure"`` each trial pushes two atoms at least ``a`` apart
    (so ``W-bar = 1`` initially).  For ``kind="function"`` it applies the
    operator to a random trigonometric polynomial and tracks ``D-bar``.
    Returns an array of shape ``(trials, len(lengths))``.
    """
    mc = metric_constants(sys)
    lengths = np.asarray(lengths)
    out = np.empty((trials, len(lengths)))
    for t in range(trials):
        u = tuple(rng.integers(1, sys.k + 1, rng.integers(0, u_max + 1)))
        v = tuple(rng.integers(1, sys.k + 1, lengths.max()))
        if kind == "measure":
            i = int(rng.integers(N))
            shift = int(rng.integers(int(np.ceil(mc.a * N)), N // 2 + 1))
            nu1, nu2 = np.zeros(N), np.zeros(N)
            nu1[i] = 1.0
            nu2[(i + shift) % N] = 1.0
            base = wasserstein(nu1, nu2, "dstar", mc)
            for n_i, n in enumerate(lengths):
                m1 = dual_apply(sys, u, v[:n], nu1)
                m2 = dual_apply(sys, u, v[:n], nu2)
                out[t, n_i] = transport_dstar(circle_nodes(N), m1 - m2, mc) / base
        elif kind == "function":
            f = _random_trig(rng, N)
            base = holder_seminorms(mc, f).D_bar
            for n_i, n in enumerate(lengths):
                Pf = normalized_quotient(sys, u, v[:n], f)
                out[t, n_i] = holder_seminorms(mc, Pf).D_bar / base
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return out


def contraction_rate(sys, trials=12, lengths=range(1, 25), rng=None, kind="measure",
                     N=DEFAULT_N, span=10, floor=1e-13):
    """Fit ``worst ratio ~ C s^n`` above the empirical ``k0``.

    ``k0_hat`` is the smallest sampled length from which every trial
    contracted (ratio below 1).  The fit uses the per-length maximum over
    trials on ``[k0_hat, k0_hat + span]``, dropping values below ``floor``.
    """
    rng = np.random.default_rng(rng)
    lengths = np.asarray(list(lengths))
    if len(lengths) < 8:
        raise ValueError("lengths must span at least 8 word sizes")
    ratios = contraction_ratios(sys, trials, lengths, rng, kind, N)
    worst = ratios.max(axis=0)
    contracted = worst < 1.0
    k0_idx = None
    for i in range(len(lengths)):
        if contracted[i:].all():
            k0_idx = i
            break
    if k0_idx is None:
        raise NumericalGuardError("no contraction observed over the sampled lengths")
    k0 = int(lengths[k0_idx])
    sel = (lengths >= k0) & (lengths <= k0 + span) & (worst > floor)
    if sel.sum() < 3:
        raise NumericalGuardError("regression degenerate: distances at machine zero")
    fit = linregress(lengths[sel], np.log(worst[sel]))
    return ContractionFit(k0, float(np.exp(fit.slope)), float(fit.rvalue ** 2),
                          lengths, worst, lengths[sel])
