"""Markov environments and annealed transfer operators.

``A_n f = sum_{|w| = n} rho([w]) L_w f`` is evaluated by dynamic programming
over the Markov state of the last letter, which costs ``O(n k^2)`` letter
applications.  The ``iota`` operator acts on functions of the environment;
it is discretised on depth-``m`` cylinders with ``lambda_{i, omega}`` frozen
at ``omega = w + tail``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._backend import kernels
from .dynamics import Word, as_word
from .errors import DegenerateSystemError, NumericalGuardError, SystemDefinitionError
from .fitting import GeometricFit, geometric_fit
from .grid import dirac, sample
from .linalg import power_iteration
from .measures import conformal_functional, quenched_conformal, wasserstein
from .transfer import DEFAULT_N, apply_letter, apply_word, apply_word_log, letter_operator


# -- environment -------------------------------------------------------------

def _is_primitive(Q):
    k = len(Q)
    A = (Q > 0).astype(np.int64)
    P = np.eye(k, dtype=np.int64)
    for _ in range((k - 1) ** 2 + 1):
        P = np.minimum(P @ A, 1)
    return bool(np.all(P > 0))


@dataclass(frozen=True, eq=False)
class MarkovEnvironment:
    """Markov measure ``rho`` on one-sided sequences over ``{1..k}``.

    ``rho([w]) = initial[w_1] * prod Q[w_j, w_{j+1}]`` with 1-based letters.
    The initial vector must be strictly positive so that the cocycle
    ``p_i(omega) = initial_i Q[i, omega_1] / initial[omega_1]`` is defined.
    """

    initial: np.ndarray
    transition: np.ndarray
    invariant: bool = False
    name: str = ""

    def __post_init__(self):
        p = np.asarray(self.initial, dtype=float)
        Q = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "initial", p)
        object.__setattr__(self, "transition", Q)
        k = len(p)
        if Q.shape != (k, k):
            raise SystemDefinitionError("transition matrix must be k x k")
        if np.any(Q < 0) or np.any(np.abs(Q.sum(axis=1) - 1) > 1e-12):
            raise SystemDefinitionError("transition rows must be probability vectors")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise SystemDefinitionError("initial vector must be a positive probability vector")
        if not _is_primitive(Q):
            raise SystemDefinitionError("transition matrix is not primitive")
        if self.invariant and np.max(np.abs(p @ Q - p)) > 1e-12:
            raise SystemDefinitionError("initial vector is not stationary for the transition")

    @classmethod
    def bernoulli(cls, p, name=""):
        p = np.asarray(p, dtype=float)
        return cls(p, np.tile(p, (len(p), 1)), True, name)

    @classmethod
    def stationary_markov(cls, Q, name=""):
        Q = np.asarray(Q, dtype=float)
        w, V = np.linalg.eig(Q.T)
        pi = np.real(V[:, np.argmin(np.abs(w - 1))])
        pi = pi / pi.sum()
        # polish so the invariance check passes at 1e-12
        for _ in range(50):
            pi = pi @ Q
        return cls(pi / pi.sum(), Q, True, name)

    @property
    def k(self):
        return len(self.initial)

    @property
    def is_bernoulli(self):
        Q = self.transition
        return bool(np.allclose(Q, Q[0][None, :], atol=1e-14)
                    and np.allclose(self.initial, Q[0], atol=1e-14))

    def cylinder_mass(self, w):
        w = as_word(w)
        if len(w) == 0:
            return 1.0
        m = self.initial[w[0] - 1]
        for a, b in zip(w[:-1], w[1:]):
            m *= self.transition[a - 1, b - 1]
        return float(m)

    def p(self, i, next_letter):
        """``p_i(omega)`` for ``omega`` starting with ``next_letter``."""
        return float(self.initial[i - 1] * self.transition[i - 1, next_letter - 1]
                     / self.initial[next_letter - 1])

    def sample(self, rng, n):
        """A ``rho``-distributed word of length ``n``."""
        out = np.empty(n, dtype=np.int64)
        if n == 0:
            return Word()
        out[0] = rng.choice(self.k, p=self.initial)
        cum = np.cumsum(self.transition, axis=1)
        r = rng.random(n)
        for j in range(1, n):
            out[j] = min(np.searchsorted(cum[out[j - 1]], r[j], side="right"), self.k - 1)
        return Word(out + 1)


# -- dynamic programming for A_n ---------------------------------------------

def _grid(f, N):
    return sample(f, N) if callable(f) else np.asarray(f, dtype=float)


def annealed_states(sys, env, n, f, scheme="linear"):
    """Yield ``(j, H_j, logscale)`` for ``j = 1..n``.

    ``H_j[b]`` is the part of ``A_j f`` coming from words ending in ``b``,
    scaled by ``exp(-logscale)`` so that the largest entry has modulus 1.
    """
    if sys.k != env.k:
        raise SystemDefinitionError("environment and system alphabets differ")
    f = np.asarray(f, dtype=float)
    Q = env.transition
    H = np.array([env.initial[b] * apply_letter(sys, b + 1, f, scheme) for b in range(sys.k)])
    logscale = 0.0
    for j in range(1, n + 1):
        if j > 1:
            mixed = Q.T @ H
            H = np.array([apply_letter(sys, c + 1, mixed[c], scheme) for c in range(sys.k)])
        m = np.max(np.abs(H))
        if m > 0:
            H = H / m
            logscale += np.log(m)
        yield j, H, logscale


def annealed_apply_log(sys, env, n, f, scheme="linear"):
    """``A_n f`` as ``(g, s)`` with ``A_n f = e^s g``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    f = _grid(f, DEFAULT_N)
    for _, H, s in annealed_states(sys, env, n, f, scheme):
        pass
    g = H.sum(axis=0)
    m = np.max(np.abs(g))
    if m == 0:
        return g, -np.inf
    return g / m, s + np.log(m)


def annealed_apply(sys, env, n, f, scheme="linear"):
    """``A_n f = sum_{|w|=n} rho([w]) L_w f`` via the state recursion."""
    g, s = annealed_apply_log(sys, env, n, f, scheme)
    out = g * np.exp(s)
    if not np.all(np.isfinite(out)):
        raise NumericalGuardError("overflow in annealed_apply; use annealed_apply_log")
    return out


def composed_apply(sys, env, n, m, f, scheme="linear"):
    """``A_n(A_m f)``.

    Equals ``A_{n+m} f`` for Bernoulli environments only; for a genuine
    Markov environment the two differ.
    """
    return annealed_apply(sys, env, n, annealed_apply(sys, env, m, f, scheme), scheme)


def annealed_brute_force(sys, env, n, f, scheme="linear"):
    """``A_n f`` summed explicitly over all ``k^n`` words."""
    f = _grid(f, DEFAULT_N)
    total = np.zeros_like(f)
    for w in product(range(1, sys.k + 1), repeat=n):
        total += env.cylinder_mass(w) * apply_word(sys, w, f, scheme)
    return total


def annealed_dual(sys, env, n, x=0.0, N=DEFAULT_N, scheme="linear"):
    """``A_n^* delta_x`` normalised to a probability, and ``log A_n(1)(x)``."""
    Q = env.transition
    k = sys.k
    tabs = [letter_operator(sys, c + 1, N, scheme) for c in range(k)]
    start = dirac(N, x)
    M = np.array([start for _ in range(k)])
    logscale = 0.0
    for _ in range(n - 1):
        pushed = np.array([kernels.ell_push(tabs[c][0], tabs[c][1], M[c], N) for c in range(k)])
        M = Q @ pushed
        m = M.max()
        M /= m
        logscale += np.log(m)
    nu = sum(env.initial[b] * kernels.ell_push(tabs[b][0], tabs[b][1], M[b], N)
             for b in range(k))
    total = nu.sum()
    return nu / total, logscale + np.log(total)


def semigroup_pressure(sys, env, n, N=DEFAULT_N, scheme="linear"):
    """``(1/n) log sup_x A_n(1)(x)``."""
    _, s = annealed_apply_log(sys, env, n, np.ones(N), scheme)
    return s / n


# -- the iota operator -------------------------------------------------------

@dataclass(frozen=True)
class SpectralData:
    """Perron data of the depth-``m`` ``iota`` matrix.

    ``pi(f)`` evaluates ``sum_w m([w]) mu_{w tail}(f)``.
    """

    depth: int
    beta: float
    g_o: np.ndarray
    m_meas: np.ndarray
    words: list
    lam: np.ndarray
    measures: np.ndarray
    matrix: np.ndarray
    depth_gap: float
    residual_right: float
    residual_left: float
    tail: Word = field(default_factory=Word)

    @property
    def pi_measure(self):
        return self.m_meas @ self.measures

    def pi(self, f):
        f = _grid(f, self.measures.shape[1])
        return float(self.pi_measure @ f)


def _iota_matrix(sys, env, depth, tail, N, scheme):
    k = sys.k
    words = [Word(w) for w in product(range(1, k + 1), repeat=depth)]
    index = {w: n for n, w in enumerate(words)}
    ones_img = np.array([apply_letter(sys, i, np.ones(N), scheme) for i in range(1, k + 1)])
    measures = np.array([quenched_conformal(sys, (), w + tail, N=N, scheme=scheme,
                                            gap=False).measure for w in words])
    lam = measures @ ones_img.T
    B = np.zeros((len(words), len(words)))
    for n, w in enumerate(words):
        for i in range(1, k + 1):
            target = index[(Word([i]) + w).prefix(depth)]
            B[n, target] += lam[n, i - 1] * env.p(i, w[0])
    return words, lam, measures, B


def iota_spectrum(sys, env, depth=4, tail=None, l=40, N=DEFAULT_N, scheme="linear",
                  gap=True):
    """Perron data ``(beta, g_o, m)`` of ``iota`` on depth-``depth`` cylinders.

    ``lambda_{i, omega}`` is frozen at ``omega = w + tail`` where ``tail``
    defaults to ``l`` ones.  ``depth_gap`` is ``|beta(depth) - beta(depth-1)|``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    tail = Word([1] * l) if tail is None else as_word(tail)
    words, lam, measures, B = _iota_matrix(sys, env, depth, tail, N, scheme)
    beta, g, _ = power_iteration(lambda x: B @ x, np.ones(len(words)))
    beta_l, m, _ = power_iteration(lambda x: x @ B, np.ones(len(words)))
    m = m / m.sum()
    g = g / (m @ g)
    res_r = float(np.max(np.abs(B @ g - beta * g)))
    res_l = float(np.max(np.abs(m @ B - beta * m)))
    depth_gap = np.nan
    if gap and depth > 1:
        coarse = iota_spectrum(sys, env, depth - 1, tail, l, N, scheme, gap=False)
        depth_gap = abs(beta - coarse.beta)
    return SpectralData(depth, float(beta), g, m, words, lam, measures, B,
                        float(depth_gap), res_r, res_l, tail)


# -- annealed convergence ----------------------------------------------------

@dataclass(frozen=True)
class AnnealedReport:
    """Convergence of ``A_n f / (beta^n h)`` to ``pi(f)``.

    ``errors[n]`` is ``sup_x |A_n f / (beta^n h) - pi(f)|`` and
    ``ratio_errors[n]`` is ``sup_x |A_n f / A_n 1 - pi(f)|``.
    """

    beta_hat: float
    h: np.ndarray
    pi_f: float
    n: np.ndarray
    errors: np.ndarray
    ratio_errors: np.ndarray
    fit: GeometricFit
    n_ref: int
    beta_iota: float = np.nan
    pi_f_iota: float = np.nan


def _log_sequence(sys, env, n_max, f, scheme):
    out = {}
    for j, H, s in annealed_states(sys, env, n_max, f, scheme):
        g = H.sum(axis=0)
        out[j] = (g, s)
    return out


def annealed_convergence(sys, env, f, n_range=range(10, 31), n_ref=None, spectral=None,
                         N=DEFAULT_N, scheme="linear", floor=1e-14):
    """Fit the geometric convergence of ``A_n f / (beta^n h)``.

    ``beta`` and ``h`` are the limits of ``A_{n+1}(1)/A_n(1)`` and
    ``beta^{-n} A_n(1)``, and ``pi(f)`` the limit of ``A_n f / A_n 1``, all
    read off at ``n_ref`` (default ``max(n_range) + 40``).  When ``spectral``
    is given, its ``beta`` and ``pi(f)`` are attached for comparison.
    """
    n_range = np.asarray(list(n_range))
    n_ref = int(n_range.max() + 40) if n_ref is None else int(n_ref)
    f = _grid(f, N)
    ones = _log_sequence(sys, env, n_ref + 1, np.ones(N), scheme)
    fs = _log_sequence(sys, env, n_ref, f, scheme)
    g_ref, s_ref = ones[n_ref]
    g_next, s_next = ones[n_ref + 1]
    log_beta = s_next + np.log(g_next.max()) - s_ref - np.log(g_ref.max())
    # h = beta^{-n_ref} A_{n_ref}(1), kept as log-scale times shape
    h_shape, h_log = g_ref, s_ref - n_ref * log_beta
    gf, sf = fs[n_ref]
    ratio_ref = gf / g_ref * np.exp(sf - s_ref)
    pi_f = float(np.mean(ratio_ref))
    errors, ratio_errors = [], []
    for n in n_range:
        gfn, sfn = fs[n]
        g1n, s1n = ones[n]
        normalised = gfn / h_shape * np.exp(sfn - n * log_beta - h_log)
        errors.append(np.max(np.abs(normalised - pi_f)))
        ratio_errors.append(np.max(np.abs(gfn / g1n * np.exp(sfn - s1n) - pi_f)))
    errors = np.array(errors)
    try:
        fit = geometric_fit(n_range, errors, floor)
    except DegenerateSystemError:
        # already converged to rounding, e.g. zero potential
        fit = None
    beta_iota = spectral.beta if spectral is not None else np.nan
    pi_iota = spectral.pi(f) if spectral is not None else np.nan
    return AnnealedReport(float(np.exp(log_beta)), h_shape * np.exp(h_log), pi_f, n_range,
                          errors, np.array(ratio_errors), fit, n_ref, beta_iota, pi_iota)


# -- annealed correlation decay ----------------------------------------------

@dataclass(frozen=True)
class DecayReport:
    """Annealed correlation discrepancy with Monte Carlo error bars.

    ``discrepancy[n] = E[int f o T_{[omega]_n} g dmu_omega] - pi_tilde(f) E[mu_omega(g)]``
    and ``ci`` is the 95 percent half-width.  ``fit`` is None when fewer
    than three leading values exceed twice their half-width.
    """

    n: np.ndarray
    discrepancy: np.ndarray
    ci: np.ndarray
    pi_tilde_f: float
    pi_tilde_ci: float
    mean_g: float
    fit: GeometricFit = None
    significant: np.ndarray = None


def _map_samples(fn, seeds, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, seeds))
    return [fn(s) for s in seeds]


def annealed_decay(sys, env, f, g, n_range=range(1, 11), samples=1000, rng=None, l=30,
                   sigma_depth=30, N=DEFAULT_N, scheme="linear", threads=1, floor=1e-12):
    """Monte Carlo estimate of the annealed decay of correlations.

    For each sampled ``omega`` the correlation ``int f o T_{[omega]_n} g dmu_omega``
    is evaluated as ``mu_{theta^n omega}(f L_u g) / mu_{theta^n omega}(L_u 1)``
    with ``u = [omega]_n``.  ``pi_tilde(f)`` is estimated from independent
    stationary paths of length ``sigma_depth + l`` split into a past and a
    future, evaluating ``mu_{sigma, omega}(f)`` by the functional path.
    Values below ``floor`` count as rounding noise and are never fitted.
    """
    if not env.invariant:
        raise SystemDefinitionError("annealed decay needs an invariant environment")
    n_range = np.asarray(list(n_range))
    n_max = int(n_range.max())
    f = _grid(f, N)
    g = _grid(g, N)
    root = np.random.SeedSequence(rng if isinstance(rng, (int, type(None))) else rng.integers(2**63))
    seeds_corr, seeds_pi = root.spawn(2)
    ones = np.ones(N)

    def correlation(seed):
        r = np.random.default_rng(seed)
        omega = env.sample(r, n_max + l)
        mu = quenched_conformal(sys, (), omega, N=N, scheme=scheme, gap=False).measure
        y = float(mu @ g)
        xs = []
        for n in n_range:
            u, rest = omega.prefix(n), omega.shift(n)
            mu_rest = quenched_conformal(sys, (), rest, N=N, scheme=scheme, gap=False).measure
            Lg, s1 = apply_word_log(sys, u, g, scheme) if np.any(g) else (g, 0.0)
            L1, s2 = apply_word_log(sys, u, ones, scheme)
            xs.append(float(mu_rest @ (f * Lg)) * np.exp(s1 - s2) / float(mu_rest @ L1))
        return y, xs

    def pi_sample(seed):
        r = np.random.default_rng(seed)
        path = env.sample(r, sigma_depth + l)
        return conformal_functional(sys, path.prefix(sigma_depth), path.shift(sigma_depth),
                                    f, N=N, scheme=scheme)

    corr = _map_samples(correlation, seeds_corr.spawn(samples), threads)
    pis = np.array(_map_samples(pi_sample, seeds_pi.spawn(samples), threads))
    Y = np.array([c[0] for c in corr])
    X = np.array([c[1] for c in corr])
    pi_t = float(pis.mean())
    pi_var = float(pis.var(ddof=1)) / samples
    Z = X - pi_t * Y[:, None]
    disc = Z.mean(axis=0)
    var = Z.var(axis=0, ddof=1) / samples + Y.mean() ** 2 * pi_var
    ci = 1.96 * np.sqrt(var)
    significant = (np.abs(disc) > 2 * ci) & (np.abs(disc) > floor)
    lead = 0
    while lead < len(n_range) and significant[lead]:
        lead += 1
    fit = None
    if lead >= 3:
        fit = geometric_fit(n_range[:lead], np.abs(disc[:lead]))
    return DecayReport(n_range, disc, ci, pi_t, 1.96 * np.sqrt(pi_var), float(Y.mean()),
                       fit, significant)


# -- equidistribution --------------------------------------------------------

@dataclass(frozen=True)
class EquidistributionReport:
    n: np.ndarray
    nu: dict
    distance: np.ndarray
    fit: GeometricFit
    pressure: np.ndarray
    limit: np.ndarray
    limit_distance: np.ndarray


def equidistribution(sys, env, points=(0.0, 0.5), n_range=range(1, 31), N=DEFAULT_N,
                     scheme="linear", floor=1e-14):
    """``nu_n^x = A_n^* delta_x / A_n(1)(x)`` for two starting points.

    Returns the W distances between the two starts per ``n`` with a
    geometric fit, the pressure estimates ``(1/n) log sup A_n(1)``, and the
    distance of each ``nu_n^{x_1}`` to the last computed one.
    """
    n_range = np.asarray(list(n_range))
    x1, x2 = points
    nu = {}
    dist, press = [], []
    for n in n_range:
        a, _ = annealed_dual(sys, env, int(n), x1, N, scheme)
        b, _ = annealed_dual(sys, env, int(n), x2, N, scheme)
        nu[int(n)] = (a, b)
        dist.append(wasserstein(a, b, "euclid"))
        press.append(semigroup_pressure(sys, env, int(n), N, scheme))
    dist = np.array(dist)
    limit = nu[int(n_range.max())][0]
    limit_dist = np.array([wasserstein(nu[int(n)][0], limit, "euclid") for n in n_range])
    try:
        fit = geometric_fit(n_range, dist, floor)
    except DegenerateSystemError:
        fit = None
    return EquidistributionReport(n_range, nu, dist, fit, np.array(press), limit, limit_dist)
