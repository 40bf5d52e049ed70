"""Expanding circle maps, words, potentials and metric constants.

Letters are the integers ``1..k``.  A word ``v = i_1 ... i_n`` acts by
``T_v = T_{i_n} o ... o T_{i_1}``, so letters are applied left to right, and
its Birkhoff sum is ``phi_v(x) = phi_{i_1}(x) + phi_{i_2}(T_{i_1} x) + ...``.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .errors import BranchCapError, SystemDefinitionError
from .grid import circle_distance

BRANCH_CAP = 2 ** 20


class Word(tuple):
    """Finite word over ``{1, ..., k}``.

    Built from a string of digits (``Word("1221")``) or any iterable of
    positive integers.  Slicing, concatenation and the accessors below all
    return ``Word`` instances.
    """

    def __new__(cls, letters=()):
        if isinstance(letters, str):
            letters = [int(c) for c in letters.replace(",", "").replace(" ", "")]
        letters = tuple(int(c) for c in letters)
        if any(c < 1 for c in letters):
            raise ValueError("letters are positive integers")
        return super().__new__(cls, letters)

    def __getitem__(self, item):
        out = tuple.__getitem__(self, item)
        return Word(out) if isinstance(item, slice) else out

    def __add__(self, other):
        return Word(tuple(self) + tuple(Word(other)))

    def __radd__(self, other):
        return Word(other) + self

    def __mul__(self, n):
        return Word(tuple(self) * n)

    def prefix(self, n):
        """``[v]_n``, the first ``n`` letters."""
        return self[:n]

    def suffix(self, n):
        """The last ``n`` letters (``_n[v]``)."""
        return self[len(self) - n:] if n > 0 else Word()

    def shift(self, n=1):
        """Drop the first ``n`` letters (the shift ``theta^n``)."""
        return self[n:]

    def __str__(self):
        if all(c < 10 for c in self):
            return "".join(str(c) for c in self)
        return ",".join(str(c) for c in self)

    def __repr__(self):
        return f"Word('{self}')"


def as_word(v):
    return v if isinstance(v, Word) else Word(v)


def periodic_word(w, n):
    """First ``n`` letters of the right-infinite word ``www...``."""
    w = as_word(w)
    reps = -(-n // len(w))
    return (w * reps).prefix(n)


def periodic_past(w, n):
    """Last ``n`` letters of the left-infinite word ``...www``."""
    w = as_word(w)
    reps = -(-n // len(w))
    return (w * reps).suffix(n)


# -- generators ------------------------------------------------------------

@dataclass(frozen=True)
class LinearMap:
    """``x -> m x mod 1`` with affine inverse branches ``(x + j)/m``."""

    m: int

    @property
    def branches(self):
        return self.m

    @property
    def min_slope(self):
        return float(self.m)

    @property
    def max_slope(self):
        return float(self.m)

    @property
    def branch_separation(self):
        return 1.0 / self.m

    @property
    def is_linear(self):
        return True

    def forward(self, x):
        return np.mod(self.m * np.asarray(x, dtype=float), 1.0)

    def inverse(self, x, j):
        return (np.asarray(x, dtype=float) + j) / self.m

    def derivative(self, x):
        return np.full(np.shape(x), float(self.m))


def _conj(x, c):
    # circle diffeomorphism x -> atan(c tan(pi x))/pi, lifted to [0, 1)
    t = np.pi * np.asarray(x, dtype=float)
    return np.mod(np.arctan2(c * np.sin(t), np.cos(t)) / np.pi, 1.0)


def _conj_derivative(x, c):
    t = np.pi * np.asarray(x, dtype=float)
    return c / (np.cos(t) ** 2 + c * c * np.sin(t) ** 2)


@dataclass(frozen=True)
class ConjugatedMap:
    """Nonlinear full-branch map ``x -> m h_c(x) mod 1``.

    ``h_c(x) = atan(c tan(pi x))/pi`` is a circle diffeomorphism with inverse
    ``h_{1/c}``, so the inverse branches ``h_{1/c}((x + j)/m)`` are explicit.
    """

    m: int
    c: float

    @property
    def branches(self):
        return self.m

    @property
    def min_slope(self):
        return self.m * min(self.c, 1.0 / self.c)

    @property
    def max_slope(self):
        return self.m * max(self.c, 1.0 / self.c)

    @property
    def branch_separation(self):
        return 1.0 / self.max_slope

    @property
    def is_linear(self):
        return False

    def forward(self, x):
        return np.mod(self.m * _conj(x, self.c), 1.0)

    def inverse(self, x, j):
        return _conj((np.asarray(x, dtype=float) + j) / self.m, 1.0 / self.c)

    def derivative(self, x):
        return self.m * _conj_derivative(x, self.c)


# -- potentials ------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Vectorised potential with declared Holder exponent and constant."""

    func: Callable
    alpha: float
    holder_const: float
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape)

    @property
    def is_constant(self):
        return self.holder_const == 0.0


def zero_potential():
    return Potential(lambda x: np.zeros_like(x), 1.0, 0.0, "zero")


def constant_potential(c):
    c = float(c)
    return Potential(lambda x: np.full_like(x, c), 1.0, 0.0, f"{c:g}")


def cosine_potential(amplitude=1.0, frequency=1, phase=0.0):
    """``amplitude * cos(2 pi (frequency x - phase))``; Lipschitz in arc length."""
    def func(x):
        return amplitude * np.cos(2.0 * np.pi * (frequency * x - phase))
    const = 2.0 * np.pi * abs(amplitude) * frequency
    return Potential(func, 1.0, const, f"{amplitude:g}*cos(2pi({frequency}x-{phase:g}))")


def expression_potential(expr, alpha=1.0, holder_const=None):
    """Potential from a closed-form expression in ``x``.

    The expression is parsed by sympy.  When ``holder_const`` is omitted and
    ``alpha == 1`` the Lipschitz constant is estimated from the derivative
    on a fine grid and inflated by 1 percent.
    """
    import sympy

    if expr in ("zero", "0"):
        return zero_potential()
    sx = sympy.Symbol("x")
    parsed = sympy.sympify(expr, locals={"x": sx, "pi": sympy.pi})
    f = sympy.lambdify(sx, parsed, "numpy")
    if holder_const is None:
        if alpha != 1.0:
            raise SystemDefinitionError("holder_const is required when alpha != 1")
        df = sympy.lambdify(sx, sympy.diff(parsed, sx), "numpy")
        xs = np.linspace(0.0, 1.0, 20001)
        holder_const = 1.01 * float(np.max(np.abs(np.broadcast_to(df(xs), xs.shape))))
    return Potential(f, float(alpha), float(holder_const), str(expr))


# -- systems ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExpandingSystem:
    """Finitely generated semigroup of expanding circle maps with potentials.

    Parameters
    ----------
    maps : sequence of LinearMap or ConjugatedMap
    potentials : sequence of Potential, one per generator
    a : float
        Injectivity radius; distinct inverse branches are more than ``2a``
        apart.
    lam : float
        Common contraction rate of all inverse branches, ``lam < 1``.
    """

    maps: tuple
    potentials: tuple
    a: float
    lam: float
    name: str = ""
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "potentials", tuple(self.potentials))
        if len(self.maps) < 1 or len(self.maps) != len(self.potentials):
            raise SystemDefinitionError("need one potential per generator")
        if not 0.0 < self.lam < 1.0:
            raise SystemDefinitionError("lambda must lie in (0, 1)")
        for T in self.maps:
            if T.branches < 2:
                raise SystemDefinitionError("every generator needs at least two branches")
            if 1.0 / T.min_slope > self.lam * (1 + 1e-12):
                raise SystemDefinitionError(
                    f"inverse branches of {T} contract only by {1.0 / T.min_slope:.4g} > lambda")
            if not 0.0 < self.a < 0.5 * T.branch_separation:
                raise SystemDefinitionError(
                    f"a={self.a} must be below half the branch separation of {T}")
        for p in self.potentials:
            if not 0.0 < p.alpha <= 1.0 or p.holder_const < 0:
                raise SystemDefinitionError("Holder exponent must lie in (0, 1]")

    @property
    def k(self):
        return len(self.maps)

    @property
    def alpha(self):
        return min(p.alpha for p in self.potentials)

    def holder_const(self, i):
        """``D_alpha(phi_i)`` at the common exponent ``alpha``."""
        p = self.potentials[i - 1]
        # d <= 1/2 on the circle, so d^a_i <= 2^(alpha - a_i) d^alpha
        return p.holder_const * 2.0 ** (self.alpha - p.alpha)

    def branch_count(self, v):
        return int(np.prod([self.maps[c - 1].branches for c in as_word(v)], dtype=object))

    def is_linear(self):
        return all(T.is_linear for T in self.maps)

    def has_constant_potentials(self):
        return all(p.is_constant for p in self.potentials)


def linear_system(ms, potentials=None, a=None, lam=None, name=""):
    """System of linear maps ``x -> m_i x mod 1``.

    Defaults: zero potentials, ``lam = 1/min(m)`` and ``a`` at 90 percent of
    the largest admissible radius.
    """
    maps = [LinearMap(int(m)) for m in ms]
    if potentials is None:
        potentials = [zero_potential() for _ in maps]
    if lam is None:
        lam = 1.0 / min(ms)
    if a is None:
        a = 0.9 * 0.5 / max(ms)
    return ExpandingSystem(tuple(maps), tuple(potentials), a, lam, name)


# -- words acting on points ------------------------------------------------

def apply_word_map(sys, v, x):
    """``T_v(x)``, letters applied left to right."""
    x = np.asarray(x, dtype=float)
    for c in as_word(v):
        x = sys.maps[c - 1].forward(x)
    return x if x.ndim else float(x)


def birkhoff_sum(sys, v, y):
    """``phi_v(y)`` summed along the forward orbit of ``y``."""
    y = np.asarray(y, dtype=float)
    total = np.zeros_like(y)
    for c in as_word(v):
        total = total + sys.potentials[c - 1](y)
        y = sys.maps[c - 1].forward(y)
    return total


def inverse_branches(sys, v, x, cap=BRANCH_CAP):
    """All preimages of ``x`` under ``T_v`` with their Birkhoff sums.

    Branches are enumerated lexicographically in the branch indices
    ``(j_1, ..., j_n)``, the first letter's index varying slowest.

    Returns
    -------
    list of (y, phi_v(y)) tuples.
    """
    v = as_word(v)
    count = sys.branch_count(v)
    if count > cap:
        raise BranchCapError(
            f"{count} preimages exceed the cap {cap}; use operator composition instead")
    ys, phis = preimage_arrays(sys, v, np.array([float(x)]))
    return [(float(y), float(p)) for y, p in zip(ys[:, 0], phis[:, 0])]


def preimage_arrays(sys, v, x):
    """Vectorised preimage enumeration.

    Returns arrays of shape ``(branch_count, len(x))`` holding preimages and
    Birkhoff sums, rows ordered as in :func:`inverse_branches`.
    """
    v = as_word(v)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(v) == 0:
        return x[None, :].copy(), np.zeros((1, len(x)))
    ranges = [range(sys.maps[c - 1].branches) for c in v]
    rows = []
    for idx in product(*ranges):
        y = x
        # pull back through the last letter first
        for c, j in zip(reversed(v), reversed(idx)):
            y = sys.maps[c - 1].inverse(y, j)
        rows.append(y)
    ys = np.array(rows)
    return ys, birkhoff_sum(sys, v, ys)


def dynamical_distance(sys, v, x, y):
    """``max_{0 <= j < |v|} d(T_{[v]_j} x, T_{[v]_j} y)``."""
    v = as_word(v)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best = circle_distance(x, y)
    for c in v[:-1] if len(v) else ():
        x = sys.maps[c - 1].forward(x)
        y = sys.maps[c - 1].forward(y)
        best = np.maximum(best, circle_distance(x, y))
    return best if np.ndim(best) else float(best)


# -- metric constants ------------------------------------------------------

@dataclass(frozen=True)
class MetricConstants:
    """Constants of the truncated metric ``d* = min(1, Delta d^alpha)``."""

    C_phi: float
    Delta: float
    alpha: float
    a: float
    lam: float

    @property
    def local_radius(self):
        """Distance below which ``d* < 1``, namely ``Delta^(-1/alpha)``."""
        return self.Delta ** (-1.0 / self.alpha)


def metric_constants(sys):
    alpha = sys.alpha
    C_phi = max(sys.holder_const(i) for i in range(1, sys.k + 1)) / (1.0 - sys.lam ** alpha)
    Delta = max(4.0 * C_phi, sys.a ** (-alpha))
    return MetricConstants(C_phi, Delta, alpha, sys.a, sys.lam)


def dstar(mc, x, y):
    d = circle_distance(x, y)
    out = np.minimum(1.0, mc.Delta * d ** mc.alpha)
    return out if np.ndim(out) else float(out)


# -- sampled checks of the declared structure --------------------------------

def check_holder(potential, rng, pairs=2000):
    """Largest observed ``|phi(x)-phi(y)| / (D d^alpha)`` on random pairs."""
    x = rng.random(pairs)
    y = np.mod(x + rng.choice([-1.0, 1.0], pairs) * rng.random(pairs) ** 3 * 0.5, 1.0)
    d = circle_distance(x, y)
    keep = d > 0
    if potential.holder_const == 0.0:
        spread = np.ptp(potential(x))
        return 0.0 if spread == 0.0 else np.inf
    ratio = np.abs(potential(x) - potential(y))[keep] / (
        potential.holder_const * d[keep] ** potential.alpha)
    return float(ratio.max())


def check_ruelle_expanding(sys, rng, pairs=2000):
    """Largest observed ``d(branch(x), branch(y)) / (lam d(x, y))`` for ``d < a``."""
    worst = 0.0
    for T in sys.maps:
        x = rng.random(pairs)
        y = np.mod(x + (2 * rng.random(pairs) - 1) * sys.a, 1.0)
        d = circle_distance(x, y)
        keep = d > 0
        for j in range(T.branches):
            # matched lifts: take y's branch image nearest to x's branch image
            xi = T.inverse(x, j)
            cands = np.array([T.inverse(y, i) for i in range(T.branches)])
            dist = circle_distance(cands, xi[None, :]).min(axis=0)
            worst = max(worst, float(np.max(dist[keep] / (sys.lam * d[keep]))))
    return worst
