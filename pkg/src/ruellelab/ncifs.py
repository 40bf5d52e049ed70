"""Non-autonomous conformal iterated function systems on ``[0, 1]``.

``L^delta_i f = sum_j |phi_{i,j}'|^delta f o phi_{i,j}`` on the interval grid
``linspace(0, 1, N)``, and ``L^delta_w = L^delta_{w_1} o ... o L^delta_{w_n}``,
so the last letter acts first.  The annealed sum over a Markov environment
is therefore evaluated by a recursion that runs from the last letter back
to the first.
"""

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .annealed import MarkovEnvironment
from .dynamics import as_word
from .errors import DegenerateSystemError, SystemDefinitionError
from .grid import interval_nodes, interval_stencil

NCIFS_N = 129


# -- contractions ------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """``x -> r x + b``."""

    r: float
    b: float

    def __call__(self, x):
        return self.r * np.asarray(x, dtype=float) + self.b

    def derivative(self, x):
        return np.full(np.shape(x), abs(self.r))

    @property
    def is_affine(self):
        return True


@dataclass(frozen=True)
class MobiusMap:
    """``x -> b + r x (1 + c) / (1 + c x)``, mapping ``[0, 1]`` onto ``[b, b + r]``.

    The derivative ``r (1 + c) / (1 + c x)^2`` is explicit; ``c > -1``.
    """

    r: float
    b: float
    c: float

    def __post_init__(self):
        if self.c <= -1:
            raise SystemDefinitionError("Mobius parameter c must exceed -1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.b + self.r * x * (1 + self.c) / (1 + self.c * x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.abs(self.r * (1 + self.c) / (1 + self.c * x) ** 2)

    @property
    def is_affine(self):
        return self.c == 0


@dataclass(frozen=True, eq=False)
class Ncifs:
    """``k`` systems of contractions on ``[0, 1]`` driven by a Markov environment.

    ``eta_minus`` and ``eta_plus`` bound every derivative from below and
    above; ``K`` is a distortion bound for compositions.
    """

    systems: tuple
    env: MarkovEnvironment
    name: str = ""
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(tuple(s) for s in self.systems))
        if len(self.systems) != self.env.k:
            raise SystemDefinitionError("environment alphabet differs from the number of systems")
        x = np.linspace(0.0, 1.0, 2001)
        for i, maps in enumerate(self.systems, 1):
            if not maps:
                raise SystemDefinitionError(f"system {i} is empty")
            ends = []
            for phi in maps:
                y = phi(x)
                if y.min() < -1e-12 or y.max() > 1 + 1e-12:
                    raise SystemDefinitionError(f"a map of system {i} leaves [0, 1]")
                if phi.derivative(x).max() >= 1:
                    raise SystemDefinitionError(f"a map of system {i} is not a contraction")
                ends.append(sorted((float(phi(0.0)), float(phi(1.0)))))
            ends.sort()
            for (_, hi), (lo, _) in zip(ends[:-1], ends[1:]):
                if lo < hi - 1e-12:
                    raise SystemDefinitionError(f"open set condition fails in system {i}")

    @property
    def k(self):
        return len(self.systems)

    def counts(self):
        return np.array([len(s) for s in self.systems])

    @property
    def is_affine(self):
        return all(phi.is_affine for s in self.systems for phi in s)

    def _derivative_range(self):
        x = np.linspace(0.0, 1.0, 2001)
        d = np.concatenate([phi.derivative(x) for s in self.systems for phi in s])
        return float(d.min()), float(d.max())

    @property
    def eta_minus(self):
        return self._derivative_range()[0]

    @property
    def eta_plus(self):
        return self._derivative_range()[1]

    @property
    def K(self):
        """``exp(sum_n eta_+^n Lip(log |phi'|))``, a distortion bound for all compositions."""
        x = np.linspace(0.0, 1.0, 2001)
        lip = 0.0
        for s in self.systems:
            for phi in s:
                lip = max(lip, float(np.max(np.abs(np.diff(np.log(phi.derivative(x))))) / (x[1] - x[0])))
        return float(np.exp(lip / (1.0 - self.eta_plus)))

    def scales(self, delta):
        """``s_i(delta) = sum_j r_{i,j}^delta`` for affine systems."""
        if not self.is_affine:
            raise SystemDefinitionError("scalar reduction needs affine maps")
        return np.array([sum(abs(phi.r) ** delta for phi in s) for s in self.systems])


# -- operators ---------------------------------------------------------------

def delta_operator(ifs, i, delta, N=NCIFS_N, scheme="linear"):
    """Stencil table of ``L^delta_i`` on the interval grid."""
    key = (i, float(delta), N, scheme)
    tab = ifs._tables.get(key)
    if tab is None:
        x = interval_nodes(N)
        Js, Cs = [], []
        for phi in ifs.systems[i - 1]:
            cols, coef = interval_stencil(phi(x), N, scheme)
            Js.append(cols)
            Cs.append(coef * phi.derivative(x)[:, None] ** delta)
        tab = (np.ascontiguousarray(np.concatenate(Js, axis=1), dtype=np.int64),
               np.ascontiguousarray(np.concatenate(Cs, axis=1)))
        if len(ifs._tables) > 4096:
            ifs._tables.clear()
        ifs._tables[key] = tab
    return tab


def _values(f, N):
    if callable(f):
        x = interval_nodes(N)
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()
    return np.ascontiguousarray(f, dtype=float)


def delta_operator_apply(ifs, i, delta, f, N=None, scheme="linear"):
    """``L^delta_i f`` at the interval grid nodes."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    f = _values(f, N or NCIFS_N)
    J, C = delta_operator(ifs, i, delta, len(f), scheme)
    return kernels.ell_pull(J, C, f)


def delta_word_apply(ifs, w, delta, f, N=None, scheme="linear"):
    """``L^delta_w f = L^delta_{w_1}(... L^delta_{w_n} f)``."""
    f = _values(f, N or NCIFS_N)
    for c in reversed(as_word(w)):
        J, C = delta_operator(ifs, c, delta, len(f), scheme)
        f = kernels.ell_pull(J, C, f)
    return f


def annealed_delta_log(ifs, delta, n, N=NCIFS_N, scheme="linear"):
    """``A^delta_m(1)`` for ``m = 1..n`` as ``(g_m, s_m)`` pairs with ``A = e^s g``."""
    env = ifs.env
    tabs = [delta_operator(ifs, c + 1, delta, N, scheme) for c in range(ifs.k)]
    ones = np.ones(N)
    G = np.array([kernels.ell_pull(J, C, ones) for J, C in tabs])
    s = 0.0
    out = []
    for m in range(1, n + 1):
        if m > 1:
            mixed = env.transition @ G
            G = np.array([kernels.ell_pull(J, C, mixed[c]) for c, (J, C) in enumerate(tabs)])
        top = G.max()
        G /= top
        s += np.log(top)
        total = env.initial @ G
        t = total.max()
        out.append((total / t, s + np.log(t)))
    return out


@dataclass(frozen=True)
class PressureEstimate:
    """Growth rate of ``sup A^delta_n(1)``.

    ``value`` is the last one-step log ratio, ``slope_change`` its change
    from the previous step, ``fit_slope`` the regression slope over
    ``n_range`` and ``spread`` the ``log sup/inf`` of ``A^delta_n(1)``.
    """

    delta: float
    value: float
    slope_change: float
    fit_slope: float
    spread: float


def annealed_pressure(ifs, delta, n_range=range(10, 41), N=NCIFS_N, scheme="linear"):
    """``P(delta) = lim (1/n) log A^delta_n(1)`` with the sup over the grid."""
    n_range = np.asarray(list(n_range))
    seq = annealed_delta_log(ifs, delta, int(n_range.max()), N, scheme)
    logs = np.array([s for _, s in seq])
    last = int(n_range.max())
    ratio = logs[last - 1] - logs[last - 2]
    prev = logs[last - 2] - logs[last - 3]
    slope = np.polyfit(n_range, logs[n_range - 1], 1)[0]
    g = seq[last - 1][0]
    return PressureEstimate(float(delta), float(ratio), float(abs(ratio - prev)), float(slope),
                            float(np.log(g.max() / g.min())))


def pressure_function(ifs, deltas, n_range=range(10, 41), N=NCIFS_N, scheme="linear"):
    return np.array([annealed_pressure(ifs, d, n_range, N, scheme).value for d in deltas])


def affine_pressure(ifs, delta):
    """Closed form ``log rho(diag(s(delta)) Q)`` for affine systems.

    Affine operators act on constants as the scalars ``s_i(delta)``.
    """
    M = ifs.scales(delta)[:, None] * ifs.env.transition
    return float(np.log(np.max(np.abs(np.linalg.eigvals(M)))))


# -- Bowen root --------------------------------------------------------------

@dataclass(frozen=True)
class BowenRoot:
    delta0: float
    bracket: tuple
    iterations: int


def bowen_root(ifs, tol=1e-10, delta_max=4.0, pressure=None, max_doublings=20):
    """Root of the strictly decreasing pressure by bisection.

    ``pressure`` defaults to the grid estimate of :func:`annealed_pressure`.
    """
    if pressure is None:
        def pressure(d):
            return annealed_pressure(ifs, d).value
    p0 = pressure(0.0)
    if p0 <= 0:
        raise DegenerateSystemError("degenerate system, dimension not bracketed: P(0) <= 0")
    hi = float(delta_max)
    for _ in range(max_doublings):
        if pressure(hi) < 0:
            break
        hi *= 2
    else:
        raise DegenerateSystemError("pressure did not change sign; raise delta_max")
    lo, it = 0.0, 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pressure(mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    return BowenRoot(0.5 * (lo + hi), (lo, hi), it)


# -- quenched pressure -------------------------------------------------------

def quenched_log_norms(ifs, omega, delta, x=0.0, N=NCIFS_N, scheme="linear"):
    """``log L^delta_{[omega]_n}(1)(x)`` for ``n = 1..|omega|``.

    Evaluated with the transposes: ``L_w(1)(x) = <L_{w_n}^T ... L_{w_1}^T delta_x, 1>``,
    so all prefixes come from one sweep.
    """
    omega = as_word(omega)
    cols, coef = interval_stencil(np.array([x]), N, "linear")
    nu = np.zeros(N)
    np.add.at(nu, cols[0], coef[0])
    s = 0.0
    out = np.empty(len(omega))
    for n, c in enumerate(omega):
        J, C = delta_operator(ifs, c, delta, N, scheme)
        nu = kernels.ell_push(J, C, nu, N)
        t = nu.sum()
        nu /= t
        s += np.log(t)
        out[n] = s
    return out


@dataclass(frozen=True)
class QuenchedPressure:
    values: np.ndarray
    mean: float
    ci: float
    annealed: float


def quenched_pressure(ifs, omega, delta, n_range=None, x=0.0, N=NCIFS_N):
    """Slope of ``log L^delta_{[omega]_n}(1)(x)`` against ``n``."""
    logs = quenched_log_norms(ifs, omega, delta, x, N)
    n = np.arange(1, len(logs) + 1)
    if n_range is not None:
        keep = np.isin(n, list(n_range))
        n, logs = n[keep], logs[keep]
    return float(np.polyfit(n, logs, 1)[0])


def quenched_pressure_samples(ifs, delta, samples=10, n=400, rng=None, N=NCIFS_N):
    """``P_omega(delta)`` for ``samples`` environments drawn from ``ifs.env``."""
    rng = np.random.default_rng(rng)
    vals = np.array([quenched_pressure(ifs, ifs.env.sample(rng, n), delta, N=N)
                     for _ in range(samples)])
    ci = 1.96 * vals.std(ddof=1) / np.sqrt(samples) if samples > 1 else np.nan
    return QuenchedPressure(vals, float(vals.mean()), float(ci),
                            annealed_pressure(ifs, delta, N=N).value)


def quenched_affine_pressure(ifs, delta):
    """Law of large numbers value ``sum_i pi_i log s_i(delta)`` for affine systems.

    ``pi`` is the stationary vector of the environment.
    """
    env = ifs.env
    pi = MarkovEnvironment.stationary_markov(env.transition).initial
    return float(pi @ np.log(ifs.scales(delta)))


# -- box counting ------------------------------------------------------------

def cylinder_intervals(ifs, omega, depth):
    """Endpoints of the depth-``depth`` cylinders ``phi_{w_1,j_1} o ... o phi_{w_n,j_n}([0,1])``."""
    omega = as_word(omega)
    lo, hi = np.array([0.0]), np.array([1.0])
    for c in reversed(omega[:depth]):
        maps = ifs.systems[c - 1]
        lo, hi = (np.concatenate([phi(lo) for phi in maps]),
                  np.concatenate([phi(hi) for phi in maps]))
    return np.minimum(lo, hi), np.maximum(lo, hi)


def box_counting_dimension(ifs, omega, depth=12, scales=None):
    """Box-counting estimate of ``dim J_omega`` from depth-``depth`` cylinders.

    Boxes of side ``eps`` are counted for scales above the largest cylinder
    diameter; the slope of ``log count`` against ``log(1/eps)`` is returned.
    """
    lo, hi = cylinder_intervals(ifs, omega, depth)
    diam = float(np.max(hi - lo))
    if scales is None:
        scales = np.geomspace(max(diam * 4, 1e-12), 0.1, 12)
    counts = []
    for eps in scales:
        a = np.floor(lo / eps).astype(np.int64)
        b = np.floor(hi / eps).astype(np.int64)
        boxes = np.unique(np.concatenate([a, b]))
        counts.append(len(boxes))
    return float(np.polyfit(np.log(1 / np.asarray(scales)), np.log(counts), 1)[0])
