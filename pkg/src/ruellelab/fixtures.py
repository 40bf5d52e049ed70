"""Built-in systems, environments and iterated function systems with reference values."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .annealed import MarkovEnvironment
from .dynamics import cosine_potential, linear_system


@dataclass(frozen=True)
class Fixture:
    """A named fixture.

    ``reference`` states the analytic or derived value the fixture is used
    to check, and ``source`` says how that value is known.
    """

    name: str
    kind: str
    description: str
    reference: str
    source: str
    factory: Callable

    def build(self):
        return self.factory()

    def line(self):
        return f"{self.name}: {self.reference}"


def doubling_zero():
    return linear_system([2], name="doubling-zero-potential")


def doubling_tripling_zero():
    return linear_system([2, 3], name="doubling-tripling-zero")


def cos_potential():
    return linear_system([2, 3], [cosine_potential(), cosine_potential()], a=0.16,
                         name="cos-potential")


def doubling_cos():
    return linear_system([2], [cosine_potential()], a=0.2, name="doubling-cos")


def commuting_x2_x4():
    return linear_system([2, 4], name="commuting-x2-x4")


def bernoulli_half():
    return MarkovEnvironment.bernoulli([0.5, 0.5], name="bernoulli-half")


def markov_decay():
    return MarkovEnvironment.stationary_markov([[0.7, 0.3], [0.4, 0.6]], name="markov-decay")


def markov_slow():
    return MarkovEnvironment.stationary_markov([[0.85, 0.15], [0.25, 0.75]], name="markov-slow")


def cantor_third():
    from .ncifs import AffineMap, Ncifs
    return Ncifs([[AffineMap(1 / 3, 0.0), AffineMap(1 / 3, 2 / 3)]],
                 MarkovEnvironment.bernoulli([1.0]), name="cantor-third")


def affine_mixture():
    from .ncifs import AffineMap, Ncifs
    quarter = [AffineMap(0.25, 0.0), AffineMap(0.25, 0.75)]
    eighth = [AffineMap(0.125, j / 4) for j in range(4)]
    return Ncifs([quarter, eighth], MarkovEnvironment.bernoulli([0.5, 0.5]),
                 name="affine-mixture")


def mobius_pair():
    from .ncifs import MobiusMap, Ncifs
    return Ncifs([[MobiusMap(0.4, 0.0, 0.5), MobiusMap(0.4, 0.6, -0.3)]],
                 MarkovEnvironment.bernoulli([1.0]), name="mobius-pair")


CATALOG = {f.name: f for f in [
    Fixture("doubling-zero-potential", "system", "x -> 2x mod 1 with zero potential",
            "λ=2 exact", "analytic", doubling_zero),
    Fixture("doubling-tripling-zero", "system", "{x -> 2x, x -> 3x} with zero potentials",
            "λ_{w,w̄} = branch count of w exact; A_n(1) = (5/2)^n under bernoulli-half",
            "analytic", doubling_tripling_zero),
    Fixture("cos-potential", "system", "{x -> 2x, x -> 3x} with potential cos(2πx) on both letters",
            "contraction rate s < 1 fitted", "derived", cos_potential),
    Fixture("doubling-cos", "system", "x -> 2x mod 1 with potential cos(2πx)",
            "quenched CLT for f = cos(2πx), s_n^2 linear in n", "derived", doubling_cos),
    Fixture("commuting-x2-x4", "system", "{x -> 2x, x -> 4x} with zero potentials",
            "all equilibrium states equal Lebesgue; boundary is a point", "analytic",
            commuting_x2_x4),
    Fixture("bernoulli-half", "environment", "i.i.d. letters with probabilities (1/2, 1/2)",
            "pressure log(5/2) over doubling-tripling-zero", "analytic", bernoulli_half),
    Fixture("markov-decay", "environment", "stationary Markov chain Q = [[.7,.3],[.4,.6]]",
            "annealed correlation decay fitted", "derived", markov_decay),
    Fixture("markov-slow", "environment", "stationary Markov chain Q = [[.85,.15],[.25,.75]]",
            "beta = spectral radius of diag(2,3) Q at zero potential", "analytic", markov_slow),
    Fixture("cantor-third", "ncifs", "middle-thirds Cantor set {x/3, x/3 + 2/3}",
            "delta0=log2/log3", "analytic", cantor_third),
    Fixture("affine-mixture", "ncifs",
            "two maps of ratio 1/4 and four maps of ratio 1/8 mixed by bernoulli-half",
            "delta0 solves (2·4^-δ + 4·8^-δ)/2 = 1", "analytic", affine_mixture),
    Fixture("mobius-pair", "ncifs", "two Möbius contractions with explicit derivatives",
            "pressure strictly decreasing; bowen root bracketed", "derived", mobius_pair),
]}


def get_fixture(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(CATALOG)}") from None


def build(name):
    return get_fixture(name).build()


def list_fixtures():
    """One ``name: reference`` line per fixture."""
    return [f.line() for f in CATALOG.values()]


def reference_value(name):
    """Numerical reference values where they are closed form."""
    return {
        "doubling-zero-potential": 2.0,
        "bernoulli-half": np.log(2.5),
        "cantor-third": np.log(2) / np.log(3),
    }.get(name)
