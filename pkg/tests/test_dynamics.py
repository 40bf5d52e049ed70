import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab.dynamics import (ConjugatedMap, ExpandingSystem, LinearMap, Word,
                                apply_word_map, cosine_potential, dstar,
                                dynamical_distance, expression_potential, inverse_branches,
                                linear_system, metric_constants, periodic_past,
                                periodic_word, preimage_arrays, zero_potential)
from ruellelab.errors import BranchCapError, SystemDefinitionError

words = st.lists(st.integers(1, 2), min_size=0, max_size=6).map(Word)


def test_word_parsing_and_slicing():
    w = Word("1221")
    assert tuple(w) == (1, 2, 2, 1)
    assert w.prefix(2) == Word("12")
    assert w.suffix(3) == Word("221")
    assert w.shift(1) == Word("221")
    assert isinstance(w[1:], Word)
    assert str(w + "3") == "12213"
    with pytest.raises(ValueError):
        Word([0, 1])


def test_periodic_words():
    assert periodic_word("12", 5) == Word("12121")
    assert periodic_past("12", 5) == Word("21212")


def test_apply_word_map_examples(doubling, mixed_zero):
    assert apply_word_map(doubling, "11", 0.1) == pytest.approx(0.4)
    assert apply_word_map(doubling, "", 0.37) == pytest.approx(0.37)
    assert apply_word_map(mixed_zero, "12", 0.2) == pytest.approx(0.2)


def test_inverse_branches_examples(doubling, mixed_zero):
    br = inverse_branches(doubling, "1", 0.0)
    assert [y for y, _ in br] == [0.0, 0.5]
    assert all(p == 0.0 for _, p in br)
    assert len(inverse_branches(mixed_zero, "1221", 0.3)) == 36


def test_inverse_branches_identity_potential():
    sys_ = linear_system([2], [expression_potential("x")])
    br = inverse_branches(sys_, "11", 0.0)
    ys = sorted(y for y, _ in br)
    assert ys == pytest.approx([0.0, 0.25, 0.5, 0.75])
    for y, p in br:
        assert p == pytest.approx(y + (2 * y) % 1.0)


def test_branch_cap(mixed_zero):
    with pytest.raises(BranchCapError):
        inverse_branches(mixed_zero, "2" * 20, 0.1, cap=1000)


@settings(max_examples=40, deadline=None)
@given(v=words, x=st.floats(0, 1, exclude_max=True))
def test_branch_consistency(v, x):
    sys_ = linear_system([2, 3], [cosine_potential(), zero_potential()], a=0.16)
    ys, phis = preimage_arrays(sys_, v, np.array([x]))
    img = np.asarray(apply_word_map(sys_, v, ys[:, 0]))
    d = np.abs(np.mod(img - x + 0.5, 1.0) - 0.5)
    assert d.max() < 1e-12
    assert ys.shape[0] == sys_.branch_count(v)


def test_preimages_of_conjugated_map():
    T = ConjugatedMap(2, 1.3)
    x = np.linspace(0, 1, 17, endpoint=False)
    for j in range(2):
        y = T.inverse(x, j)
        d = np.abs(np.mod(T.forward(y) - x + 0.5, 1.0) - 0.5)
        assert d.max() < 1e-12


def test_dynamical_distance(doubling):
    assert dynamical_distance(doubling, "111", 0.3, 0.3) == 0.0
    assert dynamical_distance(doubling, "11", 0.0, 0.01) == pytest.approx(0.02)


@settings(max_examples=30, deadline=None)
@given(v=words, x=st.floats(0, 1), y=st.floats(0, 1))
def test_dynamical_distance_matches_loop(v, x, y):
    sys_ = linear_system([2, 3])
    best, a, b = 0.0, x, y
    for j in range(max(len(v), 1)):
        d = abs(a - b) % 1.0
        best = max(best, min(d, 1 - d))
        if j < len(v):
            a = (sys_.maps[v[j] - 1].m * a) % 1.0
            b = (sys_.maps[v[j] - 1].m * b) % 1.0
    assert dynamical_distance(sys_, v, x, y) == pytest.approx(best, abs=1e-12)


def test_dstar_truncation(cos_sys):
    mc = metric_constants(cos_sys)
    assert dstar(mc, 0.2, 0.2) == 0.0
    assert dstar(mc, 0.0, cos_sys.a) == 1.0
    assert dstar(mc, 0.0, 0.5) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_dstar_triangle(x, y, z):
    sys_ = linear_system([2, 3], [expression_potential("sin(2*pi*x)**2", 0.5, 3.0)] * 2, a=0.16)
    mc = metric_constants(sys_)
    assert dstar(mc, x, z) <= dstar(mc, x, y) + dstar(mc, y, z) + 1e-12


def test_system_validation():
    with pytest.raises(SystemDefinitionError):
        linear_system([2, 3], a=0.3)
    with pytest.raises(SystemDefinitionError):
        ExpandingSystem((LinearMap(2),), (zero_potential(),), 0.2, 0.4)
    with pytest.raises(SystemDefinitionError):
        expression_potential("sqrt(x)", alpha=0.5)


def test_expression_potential_lipschitz_estimate():
    p = expression_potential("cos(2*pi*x)")
    assert p.holder_const == pytest.approx(2 * np.pi * 1.01, rel=1e-6)
    assert expression_potential("zero").is_constant


def test_branch_enumeration_order(mixed_zero):
    # first letter's branch index varies slowest
    ys, _ = preimage_arrays(mixed_zero, "12", np.array([0.0]))
    expect = [((0 + j2) / 3 + j1) / 2 for j1, j2 in itertools.product(range(2), range(3))]
    assert ys[:, 0] == pytest.approx(expect)
