"""Word metric, expansion coefficients and the equilibrium distance on the semigroup.

An element ``T_w`` carries the equilibrium state ``mu_{w_, w^-}`` built from
the periodic past ``...www`` and the periodic future ``www...``.  The
distance ``d_G(v, w) = Wbar(mu_v, mu_w) + 1/kappa(T_v) + 1/kappa(T_w)``
for ``v != w`` makes words with expanding ``T_w`` and converging
equilibria into Cauchy sequences.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import apply_word_map, as_word, metric_constants, periodic_past, periodic_word
from .errors import DegenerateSystemError
from .fitting import geometric_fit, power_fit
from .grid import circle_nodes
from .measures import bilateral_equilibrium, circle_w1, wasserstein
from .transfer import DEFAULT_N


def word_metric(v, w):
    """Two-sided prefix and suffix metric on finite words.

    ``2^-k1 + 2^-k2`` where ``k1`` is the first position at which the words
    differ or the shorter one ends, and ``k2`` the same counted from the
    right; 0 for equal words.
    """
    v, w = as_word(v), as_word(w)
    if v == w:
        return 0.0
    m = min(len(v), len(w))

    def first_mismatch(a, b):
        for k in range(1, m + 1):
            if a[k - 1] != b[k - 1]:
                return k
        return m + 1

    k1 = first_mismatch(v, w)
    k2 = first_mismatch(v[::-1], w[::-1])
    return 2.0 ** -k1 + 2.0 ** -k2


def kappa(sys, w, samples=4097):
    """Minimal local expansion of ``T_w``.

    Exact product of slopes for linear generators; otherwise the minimum of
    ``|T_w'|`` over a grid, using the chain rule along forward orbits.
    """
    w = as_word(w)
    if sys.is_linear():
        return float(np.prod([sys.maps[c - 1].min_slope for c in w]))
    x = np.linspace(0.0, 1.0, samples, endpoint=False)
    d = np.ones_like(x)
    for c in w:
        T = sys.maps[c - 1]
        d *= np.abs(T.derivative(x))
        x = T.forward(x)
    return float(d.min())


@dataclass(frozen=True)
class SemigroupElement:
    word: object
    kappa: float
    equilibrium: np.ndarray


class EquilibriumCache:
    """Memoised equilibrium states ``mu_{w_, w^-}`` for one system.

    ``depth`` letters of the periodic past and future are used.
    """

    def __init__(self, sys, depth=40, N=DEFAULT_N, scheme="linear"):
        self.sys = sys
        self.depth = depth
        self.N = N
        self.scheme = scheme
        self.mc = metric_constants(sys)
        self._store = {}

    def __call__(self, w):
        w = as_word(w)
        el = self._store.get(w)
        if el is None:
            if len(w) == 0:
                raise ValueError("the empty word has no equilibrium state")
            qm = bilateral_equilibrium(self.sys, periodic_past(w, self.depth),
                                       periodic_word(w, self.depth), N=self.N,
                                       scheme=self.scheme, gap=False)
            el = SemigroupElement(w, kappa(self.sys, w), qm.measure)
            self._store[w] = el
        return el

    def wbar(self, v, w):
        return wasserstein(self(v).equilibrium, self(w).equilibrium, "dstar", self.mc,
                           check=self.scheme == "linear")


def equilibrium_state(sys, w, depth=40, N=DEFAULT_N, scheme="linear"):
    return EquilibriumCache(sys, depth, N, scheme)(w)


def equilibrium_distance(sys, v, w, cache=None):
    """``d_G(T_v, T_w)``; 0 for equal words."""
    v, w = as_word(v), as_word(w)
    if len(v) == 0 or len(w) == 0:
        raise ValueError("words must be nonempty")
    if v == w:
        return 0.0
    cache = cache or EquilibriumCache(sys)
    return cache.wbar(v, w) + 1.0 / cache(v).kappa + 1.0 / cache(w).kappa


def invariance_defect(sys, el):
    """Euclidean W distance between ``mu`` and its image under ``T_w``."""
    mu = el.equilibrium
    x = circle_nodes(len(mu))
    return circle_w1(np.asarray(apply_word_map(sys, el.word, x)), mu, x, mu)


# -- Cauchy probes -----------------------------------------------------------

def nested_words(core, left, right, n_max):
    """``w_n = left^n core right^n`` for ``n = 0..n_max``."""
    core, left, right = as_word(core), as_word(left), as_word(right)
    return [left * n + core + right * n for n in range(n_max + 1)]


@dataclass(frozen=True)
class CauchyReport:
    """Successive ``d_G`` gaps of a word sequence.

    ``is_cauchy`` requires a geometric fit of the gaps with rate below one;
    ``offending`` is the index of the largest gap increase otherwise.
    """

    words: list
    gaps: np.ndarray
    wbar_gaps: np.ndarray
    rate: float
    r2: float
    is_cauchy: bool
    limit_measure: np.ndarray
    offending: int = -1


def cauchy_probe(sys, words, cache=None, floor=1e-14):
    if len(words) < 5:
        raise ValueError("a Cauchy probe needs at least five words")
    cache = cache or EquilibriumCache(sys)
    words = [as_word(w) for w in words]
    gaps = np.array([equilibrium_distance(sys, a, b, cache) for a, b in zip(words[:-1], words[1:])])
    wgaps = np.array([cache.wbar(a, b) if a != b else 0.0 for a, b in zip(words[:-1], words[1:])])
    limit = cache(words[-1]).equilibrium
    if np.all(gaps <= floor):
        return CauchyReport(words, gaps, wgaps, 0.0, 1.0, True, limit)
    try:
        fit = geometric_fit(np.arange(len(gaps)), gaps, floor)
    except DegenerateSystemError:
        return CauchyReport(words, gaps, wgaps, np.nan, np.nan, False, limit,
                            int(np.argmax(np.diff(gaps))) + 1)
    ok = fit.rate < 1 and fit.r2 >= 0.9
    bad = -1 if ok else int(np.argmax(np.diff(gaps))) + 1
    return CauchyReport(words, gaps, wgaps, fit.rate, fit.r2, ok, limit, bad)


# -- Holder regression -------------------------------------------------------

@dataclass(frozen=True)
class HolderFit:
    exponent: float
    r2: float
    word_distance: np.ndarray
    wbar: np.ndarray


def holder_regression(sys, pairs=200, max_shared=8, core_len=(1, 4), rng=None, cache=None):
    """Fit ``Wbar(mu_v, mu_w) ~ C d_{W*}(v, w)^gamma`` over random word pairs.

    Pairs share a random prefix and suffix of common length ``j`` drawn from
    ``0..max_shared`` and differ in their cores, so ``d_{W*}`` spans
    ``2^-1 .. 2^-(max_shared+1)``.
    """
    rng = np.random.default_rng(rng)
    cache = cache or EquilibriumCache(sys)
    k = sys.k
    dist, wb = [], []
    for _ in range(pairs):
        j = int(rng.integers(0, max_shared + 1))
        p = list(rng.integers(1, k + 1, j))
        s = list(rng.integers(1, k + 1, j))
        while True:
            a = list(rng.integers(1, k + 1, rng.integers(*core_len, endpoint=True)))
            b = list(rng.integers(1, k + 1, rng.integers(*core_len, endpoint=True)))
            v, w = as_word(p + a + s), as_word(p + b + s)
            if v != w:
                break
        dist.append(word_metric(v, w))
        wb.append(cache.wbar(v, w))
    dist, wb = np.array(dist), np.array(wb)
    gamma, r2 = power_fit(dist, wb)
    return HolderFit(gamma, r2, dist, wb)


# -- metric axioms -----------------------------------------------------------

def pairwise_distances(dist, points):
    """Matrix of ``dist`` over ``points``.

    Both orders of every pair are evaluated so that symmetry can be checked.
    """
    n = len(points)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                M[i, j] = dist(points[i], points[j])
    return M


def metric_axiom_violations(M, triples, same=None, tol=1e-9):
    """Count identity, symmetry and triangle violations of a distance matrix.

    ``same[i, j]`` marks pairs of equal points; by default only the
    diagonal.
    """
    M = np.asarray(M, dtype=float)
    if same is None:
        same = np.eye(len(M), dtype=bool)
    bad = int(np.sum(np.abs(M[same]) > 0))
    bad += int(np.sum(M[~same] <= 0))
    bad += int(np.sum(np.abs(M - M.T) > tol))
    t = np.asarray(triples)
    i, j, l = t[:, 0], t[:, 1], t[:, 2]
    bad += int(np.sum(M[i, l] > M[i, j] + M[j, l] + tol))
    return bad
