import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab import fixtures
from ruellelab.annealed import MarkovEnvironment
from ruellelab.errors import DegenerateSystemError, SystemDefinitionError
from ruellelab.ncifs import (AffineMap, MobiusMap, Ncifs, affine_pressure, annealed_pressure,
                             box_counting_dimension, bowen_root, delta_operator_apply,
                             delta_word_apply, pressure_function, quenched_affine_pressure,
                             quenched_pressure, quenched_pressure_samples)


@pytest.fixture(scope="module")
def cantor():
    return fixtures.build("cantor-third")


@pytest.fixture(scope="module")
def mixture():
    return fixtures.build("affine-mixture")


@pytest.fixture(scope="module")
def mobius():
    return fixtures.build("mobius-pair")


def mixture_equation(d):
    return (2 * 4.0 ** -d + 4 * 8.0 ** -d) / 2 - 1


def bisect(fn, lo, hi, tol=1e-13):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if fn(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def test_validation():
    env = MarkovEnvironment.bernoulli([1.0])
    with pytest.raises(SystemDefinitionError):
        Ncifs([[AffineMap(0.6, 0.0), AffineMap(0.6, 0.4)]], env)
    with pytest.raises(SystemDefinitionError):
        Ncifs([[AffineMap(0.5, 0.7)]], env)
    with pytest.raises(SystemDefinitionError):
        Ncifs([[AffineMap(1.0, 0.0)]], env)
    with pytest.raises(SystemDefinitionError):
        MobiusMap(0.5, 0.0, -1.0)


def test_delta_operator_constants(cantor):
    for d in (0.0, 0.3, 1.0):
        out = delta_operator_apply(cantor, 1, d, np.ones(65))
        assert out == pytest.approx(np.full(65, 2 * 3.0 ** -d), rel=1e-14)


def test_mobius_derivative_matches_finite_differences(mobius):
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    for phi in mobius.systems[0]:
        fd = (phi(x + h) - phi(x - h)) / (2 * h)
        assert phi.derivative(x) == pytest.approx(np.abs(fd), abs=1e-6)


def test_word_operator_order(mixture):
    # for affine maps a word acts on constants as the product of scalars
    w = "1221"
    s = mixture.scales(0.7)
    out = delta_word_apply(mixture, w, 0.7, np.ones(33))
    assert out == pytest.approx(np.full(33, s[0] ** 2 * s[1] ** 2), rel=1e-12)


def test_pressure_matches_closed_form(mixture):
    for d in (0.0, 0.3, 0.6, 1.2):
        est = annealed_pressure(mixture, d)
        assert est.value == pytest.approx(np.log((2 * 4.0 ** -d + 4 * 8.0 ** -d) / 2), abs=1e-8)
        assert est.value == pytest.approx(affine_pressure(mixture, d), abs=1e-10)


def test_pressure_lower_bound_at_zero(mixture, mobius):
    for ifs in (mixture, mobius):
        assert annealed_pressure(ifs, 0.0).value >= np.log(ifs.counts().min()) - 1e-12


def test_pressure_monotone_and_lipschitz(mobius):
    deltas = np.linspace(0.0, 1.5, 50)
    P = pressure_function(mobius, deltas)
    dP = np.diff(P)
    eps = np.diff(deltas)
    assert np.all(dP < 0)
    assert np.all(dP >= eps * np.log(mobius.eta_minus) - 1e-9)
    assert np.all(dP <= eps * np.log(mobius.eta_plus) + 1e-9)


def test_bowen_root_cantor(cantor):
    assert bowen_root(cantor).delta0 == pytest.approx(np.log(2) / np.log(3), abs=1e-8)


def test_bowen_root_mixture(mixture):
    oracle = bisect(mixture_equation, 0.0, 2.0)
    assert bowen_root(mixture).delta0 == pytest.approx(oracle, abs=1e-6)


def test_bowen_root_degenerate():
    ifs = Ncifs([[AffineMap(0.5, 0.0)]], MarkovEnvironment.bernoulli([1.0]))
    with pytest.raises(DegenerateSystemError, match="dimension not bracketed"):
        bowen_root(ifs)


def test_bowen_root_mobius(mobius):
    root = bowen_root(mobius, tol=1e-8).delta0
    # frozen from the grid pressure at N = 129
    assert root == pytest.approx(0.7597, abs=1e-3)
    assert annealed_pressure(mobius, root).value == pytest.approx(0.0, abs=1e-7)


def test_quenched_equals_annealed_when_autonomous(cantor, mobius):
    for ifs in (cantor, mobius):
        for d in (0.2, 0.9):
            q = quenched_pressure(ifs, "1" * 200, d, n_range=range(100, 201))
            assert q == pytest.approx(annealed_pressure(ifs, d).value, abs=1e-6)


def test_quenched_mixture_law_of_large_numbers(mixture):
    d = 0.6
    qp = quenched_pressure_samples(mixture, d, samples=20, n=400, rng=7)
    lln = quenched_affine_pressure(mixture, d)
    assert abs(qp.mean - lln) <= max(qp.ci, 1e-3)
    assert lln == pytest.approx(0.5 * np.log(2 * 4 ** -d) + 0.5 * np.log(4 * 8 ** -d))
    # Jensen: the quenched value sits below the annealed one for a genuine mixture
    assert lln < affine_pressure(mixture, d)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.45), st.floats(0.0, 2.0))
def test_two_map_affine_pressure(r, d):
    ifs = Ncifs([[AffineMap(r, 0.0), AffineMap(r, 1 - r)]], MarkovEnvironment.bernoulli([1.0]))
    assert annealed_pressure(ifs, d, n_range=range(5, 11)).value == pytest.approx(
        np.log(2 * r ** d), abs=1e-10)


def test_box_counting_cantor(cantor):
    assert box_counting_dimension(cantor, "1" * 14, depth=14) == pytest.approx(
        np.log(2) / np.log(3), abs=0.01)
