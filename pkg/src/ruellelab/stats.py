"""Martingale decomposition of quenched Birkhoff sums and CLT checks.

With ``mu_n = mu_{[omega]_n, theta^n omega}`` the image of ``mu_omega`` under
``T_{[omega]_n}``, the centred observables are ``f_n = f - mu_n(f)`` and the
coboundaries satisfy ``h_0 = 0``, ``h_{n+1} = P_{[omega]_n}^{omega_{n+1}}(f_n + h_n)``.
Then ``U_n = u_n o T_{[omega]_n}`` with ``u_n = f_n + h_n - h_{n+1} o T_{omega_{n+1}}``
are reverse martingale differences for the filtration ``T_{[omega]_n}^{-1} B``.

All ``mu_n`` come from a single backward dual sweep, since
``mu_n = (P_{[omega]_n}^{omega_{n+1}})^* mu_{n+1}``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest

from ._backend import kernels
from .dynamics import as_word
from .errors import DegenerateSystemError, SystemDefinitionError
from .fitting import geometric_fit, power_fit
from .grid import circle_nodes, dirac, interpolate, sample
from .measures import quenched_conformal
from .transfer import DEFAULT_N, letter_indices, word_tables


def _grid(f, N):
    return sample(f, N) if callable(f) else np.asarray(f, dtype=float)


def check_finitely_expanding(sys):
    """Every generator has bounded derivative, so it is finitely expanding."""
    for T in sys.maps:
        if not np.isfinite(T.max_slope):
            raise SystemDefinitionError(f"{T} is not finitely expanding")


# -- orbit sampling ----------------------------------------------------------

def sample_grid_measure(mu, size, rng):
    """Points distributed as the piecewise-linear density of a grid measure.

    An atom at node ``j/N`` stands for a hat function of half-width ``1/N``,
    which matches the transpose of linear interpolation, so a node is drawn
    by inverse CDF and offset by a triangular variate.
    """
    mu = np.asarray(mu, dtype=float)
    N = len(mu)
    w = np.clip(mu, 0.0, None)
    cdf = np.cumsum(w) / w.sum()
    j = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), N - 1)
    offset = (rng.random(size) + rng.random(size) - 1.0) / N
    return np.mod(j / N + offset, 1.0)


def float_orbit(sys, omega, x, n):
    """``T_{[omega]_k}(x)`` for ``k = 0..n`` by forward iteration in floating point.

    Forward orbits of linear maps lose one bit per doubling, so this is
    only meaningful for short words.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = [x]
    for c in as_word(omega)[:n]:
        x = sys.maps[c - 1].forward(x)
        out.append(x)
    return np.array(out)


# -- decomposition -----------------------------------------------------------

@dataclass(frozen=True)
class MartingaleDecomposition:
    """Grid data of the coboundary decomposition along ``omega``.

    Attributes
    ----------
    means : ndarray
        ``mu_n(f) = int f o T_{[omega]_n} dmu_omega`` for ``n = 0..n_max``.
    f_n, h, u : ndarray
        Rows are grid functions; ``h`` has ``n_max + 1`` rows.
    measures : ndarray
        ``mu_n`` for ``n = 0..n_max``; row 0 is ``mu_omega``.
    s_sq, sigma_sq : ndarray
        ``s_n^2`` and ``sigma_n^2`` for ``n = 0..n_max``.
    weights : ndarray
        ``L_{[omega]_n}(1)`` scaled to unit sup norm, ``n = 0..n_max``.
    """

    omega: object
    f: np.ndarray
    f_func: object
    means: np.ndarray
    f_n: np.ndarray
    h: np.ndarray
    u: np.ndarray
    measures: np.ndarray
    s_sq: np.ndarray
    sigma_sq: np.ndarray
    weights: np.ndarray
    scheme: str

    @property
    def n_max(self):
        return len(self.means) - 1

    @property
    def h_sup(self):
        return np.max(np.abs(self.h), axis=1)

    def _f_at(self, k, x):
        if self.f_func is not None:
            return np.asarray(self.f_func(x), dtype=float) - self.means[k]
        return interpolate(self.f_n[k], x, self.scheme)

    def _h_at(self, k, x):
        return interpolate(self.h[k], x, self.scheme)

    def increments(self, orbit, n):
        """``U_k`` for ``k < n`` at points whose orbit rows are ``orbit[k]``."""
        return np.array([self._f_at(k, orbit[k]) + self._h_at(k, orbit[k])
                         - self._h_at(k + 1, orbit[k + 1]) for k in range(n)])

    def birkhoff_terms(self, orbit, n):
        """``f_k o T_{[omega]_k}`` for ``k < n``."""
        return np.array([self._f_at(k, orbit[k]) for k in range(n)])

    def sample_orbits(self, sys, n, size, rng):
        """Orbits ``x_k = T_{[omega]_k}(x)``, ``k = 0..n``, with ``x ~ mu_omega``.

        ``x_n`` is drawn from the grid measure ``mu_n`` and the orbit is
        built backwards: given ``x_{k+1}``, the preimage ``z`` under
        ``T_{omega_{k+1}}`` is chosen with probability proportional to
        ``exp(phi(z)) L_{[omega]_k}(1)(z)``, which is the kernel of
        ``P_{[omega]_k}^{omega_{k+1}}``.  This reproduces the fine structure
        of ``mu_omega`` that a grid sample followed by forward iteration
        loses after ``log_2 N`` steps, and the backward chain only ever
        contracts, so it is safe in floating point.
        """
        out = np.empty((n + 1, size))
        out[n] = sample_grid_measure(self.measures[n], size, rng)
        for k in range(n - 1, -1, -1):
            c = self.omega[k]
            T = sys.maps[c - 1]
            z = np.array([T.inverse(out[k + 1], j) for j in range(T.branches)])
            w = np.exp(sys.potentials[c - 1](z)) * interpolate(self.weights[k], z, self.scheme)
            cdf = np.cumsum(np.clip(w, 0.0, None), axis=0)
            r = rng.random(size) * cdf[-1]
            pick = np.minimum((cdf < r).sum(axis=0), T.branches - 1)
            out[k] = np.mod(z[pick, np.arange(size)], 1.0)
        return out

    def telescoping_error(self, orbit, n):
        """``max |sum U_k - (sum f_k o T_k - h_n o T_n)|`` over the given orbits."""
        lhs = self.increments(orbit, n).sum(axis=0)
        rhs = self.birkhoff_terms(orbit, n).sum(axis=0) - self._h_at(n, orbit[n])
        return float(np.max(np.abs(lhs - rhs)))

    def orthogonality(self, sys, n, psi):
        """``int U_n . psi o T_{[omega]_{n+1}} dmu_omega``, evaluated as ``mu_n(u_n . psi o T)``."""
        x = circle_nodes(len(self.f))
        c = self.omega[n]
        Tx = sys.maps[c - 1].forward(x)
        psi_T = np.asarray(psi(Tx), dtype=float) if callable(psi) else interpolate(psi, Tx, self.scheme)
        return float(self.measures[n] @ (self.u[n] * psi_T))


def _compose_grid(sys, c, h, scheme):
    x = circle_nodes(len(h))
    return interpolate(h, sys.maps[c - 1].forward(x), scheme)


def build_decomposition(sys, omega, f, n_max, l=40, N=DEFAULT_N, scheme="linear"):
    """Coboundary decomposition of ``f`` along ``omega`` up to ``n_max``.

    ``omega`` must supply at least ``n_max + l`` letters; the measures
    ``mu_n`` are computed at truncation depth ``n_max + l - n``.
    """
    check_finitely_expanding(sys)
    omega = as_word(omega)
    L = n_max + l
    if len(omega) < L:
        raise ValueError(f"omega needs at least {L} letters")
    omega = omega.prefix(L)
    f_func = f if callable(f) else None
    f = _grid(f, N)
    Jall, Call = word_tables(sys, N, scheme)
    letters = letter_indices(omega)
    G, _ = kernels.normalized_orbit(Jall, Call, letters, np.ones(N))
    # backward sweep: mu_L = delta_0, mu_j = (P_j)^* mu_{j+1}
    nu = dirac(N, 0.0)
    measures = np.empty((n_max + 1, N))
    for j in range(L - 1, -1, -1):
        nu = kernels.quotient_push(Jall, Call, letters[j:j + 1], G[j:j + 1], nu)
        if j <= n_max:
            measures[j] = nu
    means = measures @ f
    f_n = f[None, :] - means[:, None]
    h = np.zeros((n_max + 1, N))
    u = np.zeros((n_max, N))
    s_sq = np.zeros(n_max + 1)
    sigma_sq = np.zeros(n_max + 1)
    for n in range(n_max):
        F, _, _ = kernels.quotient_pull(Jall, Call, letters[n:n + 1], f_n[n] + h[n], G[n])
        h[n + 1] = F
        u[n] = f_n[n] + h[n] - _compose_grid(sys, omega[n], h[n + 1], scheme)
        mu = measures[n]
        s_sq[n + 1] = s_sq[n] + 2 * mu @ (f_n[n] * h[n]) + mu @ f_n[n] ** 2
        sigma_sq[n + 1] = sigma_sq[n] + mu @ u[n] ** 2
    return MartingaleDecomposition(omega, f, f_func, means, f_n, h, u, measures,
                                   s_sq, sigma_sq, G[:n_max + 1], scheme)


@dataclass(frozen=True)
class VarianceGrowth:
    """Power-law fit ``s_n^2 ~ c n^gamma`` and the partial sum of ``s_n^{-4}``.

    ``summable_hint`` is ``gamma > 1/2``; it is a diagnostic, not a proof.
    """

    gamma: float
    r2: float
    partial_sum: float
    summable_hint: bool
    sigma_minus_s: float


def variance_growth(dec, n_min=10):
    n = np.arange(dec.n_max + 1)
    keep = n >= n_min
    gamma, r2 = power_fit(n[keep], dec.s_sq[keep])
    s = dec.s_sq[1:]
    partial = float(np.sum(1.0 / s[s > 0] ** 2))
    gap = float(np.max(np.abs(np.sqrt(dec.sigma_sq) - np.sqrt(np.maximum(dec.s_sq, 0)))))
    return VarianceGrowth(gamma, r2, partial, gamma > 0.5, gap)


# -- the CLT -----------------------------------------------------------------

@dataclass(frozen=True)
class CLTReport:
    status: str
    n: int
    samples: int
    ks_distance: float = np.nan
    ks_pvalue: float = np.nan
    variance_ratio: float = np.nan
    s_n_sq: float = np.nan


def quenched_clt_check(sys, omega, f, n=200, samples=10_000, rng=None, l=40, N=DEFAULT_N,
                       scheme="linear", dec=None, tol=1e-12):
    """KS distance of ``sum_{k<n} f_k(T_{[omega]_k} x) / s_n`` to N(0, 1) for ``x ~ mu_omega``.

    Orbits come from :meth:`MartingaleDecomposition.sample_orbits`.  Returns status
    ``"degenerate"`` without sampling when ``s_n^2`` vanishes.
    """
    omega = as_word(omega)
    if dec is None:
        dec = build_decomposition(sys, omega, f, n, l, N, scheme)
    s_sq = float(dec.s_sq[n])
    if s_sq <= tol:
        return CLTReport("degenerate", n, samples, s_n_sq=s_sq)
    rng = np.random.default_rng(rng)
    orbit = dec.sample_orbits(sys, n, samples, rng)
    S = dec.birkhoff_terms(orbit, n).sum(axis=0)
    z = S / np.sqrt(s_sq)
    ks = kstest(z, "norm")
    return CLTReport("ok", n, samples, float(ks.statistic), float(ks.pvalue),
                     float(np.var(z)), s_sq)


# -- quenched correlation decay ----------------------------------------------

@dataclass(frozen=True)
class CorrelationReport:
    n: np.ndarray
    errors: np.ndarray
    mu_f: float
    fit: object


def quenched_correlation_decay(sys, omega, f, n_range=range(1, 31), l=40, N=DEFAULT_N,
                               scheme="linear", floor=1e-13):
    """``sup |P_0^{[omega]_n} f - mu_omega(f)|`` against ``n`` with a geometric fit.

    ``fit`` is None when the error is below ``floor`` almost everywhere.
    """
    n_range = np.asarray(list(n_range))
    omega = as_word(omega)
    n_max = int(n_range.max())
    f = _grid(f, N)
    mu = quenched_conformal(sys, (), omega.prefix(n_max + l), N=N, scheme=scheme,
                            gap=False).measure
    mu_f = float(mu @ f)
    Jall, Call = word_tables(sys, N, scheme)
    letters = letter_indices(omega.prefix(n_max))
    F, g = f.copy(), np.ones(N)
    errors = {}
    for j in range(n_max):
        F, g, _ = kernels.quotient_pull(Jall, Call, letters[j:j + 1], F, g)
        errors[j + 1] = float(np.max(np.abs(F - mu_f)))
    errors = np.array([errors[int(n)] for n in n_range])
    try:
        fit = geometric_fit(n_range, errors, floor)
    except DegenerateSystemError:
        fit = None
    return CorrelationReport(n_range, errors, mu_f, fit)


def weierstrass(J=10, ratio=2, weight=0.5):
    """``sum_{j<J} weight^j cos(2 pi ratio^j x)``, Lipschitz for ``weight * ratio < 1`` only.

    Under the doubling map with zero potential ``P^n`` kills the first
    ``n`` modes, so the sup error after ``n`` steps is ``sum_{j>=n} weight^j``.
    """
    def func(x):
        x = np.asarray(x, dtype=float)
        return sum(weight ** j * np.cos(2 * np.pi * ratio ** j * x) for j in range(J))
    return func
