import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab import fixtures
from ruellelab.annealed import (MarkovEnvironment, annealed_apply, annealed_brute_force,
                                annealed_convergence, annealed_decay, annealed_dual,
                                composed_apply, equidistribution, iota_spectrum,
                                semigroup_pressure)
from ruellelab.errors import SystemDefinitionError
from ruellelab.fitting import geometric_fit
from ruellelab.grid import circle_nodes, lebesgue, sample
from ruellelab.measures import wasserstein
from ruellelab.transfer import apply_word

from conftest import cos2pi

N = 256


def word_sum(sys_, env, n, f):
    """``sum_w rho([w]) L_w f`` with the cylinder masses written out by hand."""
    p, Q = env.initial, env.transition
    total = np.zeros_like(f)
    for w in itertools.product(range(sys_.k), repeat=n):
        mass = p[w[0]] * np.prod([Q[a, b] for a, b in zip(w[:-1], w[1:])])
        total += mass * apply_word(sys_, [c + 1 for c in w], f)
    return total


def sin2pi(x):
    return np.sin(2 * np.pi * np.asarray(x, dtype=float))


def test_environment_validation():
    with pytest.raises(SystemDefinitionError):
        MarkovEnvironment(np.array([0.5, 0.5]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(SystemDefinitionError):
        MarkovEnvironment(np.array([0.5, 0.5]), np.array([[0.7, 0.3], [0.4, 0.6]]), invariant=True)
    env = fixtures.build("markov-decay")
    assert env.initial @ env.transition == pytest.approx(env.initial, abs=1e-14)
    assert env.initial == pytest.approx([4 / 7, 3 / 7], abs=1e-14)
    assert not env.is_bernoulli and fixtures.build("bernoulli-half").is_bernoulli


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10_000))
def test_cylinder_masses_sum_to_one(n, seed):
    env = fixtures.build("markov-slow")
    total = sum(env.cylinder_mass(w) for w in itertools.product((1, 2), repeat=n))
    assert total == pytest.approx(1.0, abs=1e-12)
    w = env.sample(np.random.default_rng(seed), n)
    assert len(w) == n and set(w) <= {1, 2}


def test_sampled_letter_frequencies():
    env = fixtures.build("markov-decay")
    w = np.array(env.sample(np.random.default_rng(0), 20_000))
    assert np.mean(w == 1) == pytest.approx(4 / 7, abs=0.02)


def test_zero_potential_bernoulli_growth(mixed_zero, bernoulli):
    for n in (1, 4, 9):
        assert annealed_apply(mixed_zero, bernoulli, n, np.ones(N)) == pytest.approx(
            np.full(N, 2.5 ** n), rel=1e-12)


@pytest.mark.parametrize("sys_name", ["doubling-tripling-zero", "cos-potential"])
@pytest.mark.parametrize("env_name", ["bernoulli-half", "markov-decay"])
def test_dp_matches_word_sum(sys_name, env_name):
    sys_, env = fixtures.build(sys_name), fixtures.build(env_name)
    f = sample(lambda x: np.cos(2 * np.pi * x) + 0.2 * np.sin(10 * np.pi * x), N)
    for n in range(1, 6):
        dp = annealed_apply(sys_, env, n, f)
        ref = word_sum(sys_, env, n, f)
        assert np.max(np.abs(dp - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))
    assert annealed_brute_force(sys_, env, 3, f) == pytest.approx(word_sum(sys_, env, 3, f),
                                                                   rel=1e-12, abs=1e-12)


def test_bernoulli_power_identity(cos_sys, bernoulli):
    f = sample(cos2pi, N)
    a1 = f
    for n in range(1, 13):
        a1 = annealed_apply(cos_sys, bernoulli, 1, a1)
        an = annealed_apply(cos_sys, bernoulli, n, f)
        assert np.max(np.abs(an - a1)) <= 1e-10 * np.max(np.abs(an))


def test_markov_composition_mismatch(cos_sys, markov):
    f = np.ones(N)
    joint = annealed_apply(cos_sys, markov, 5, f)
    split = composed_apply(cos_sys, markov, 2, 3, f)
    assert np.max(np.abs(joint - split)) / np.max(joint) > 1e-3


def test_iota_bernoulli_zero_potential(mixed_zero):
    env = MarkovEnvironment.bernoulli([0.3, 0.7])
    sp = iota_spectrum(mixed_zero, env, depth=3, N=N)
    assert sp.beta == pytest.approx(2 * 0.3 + 3 * 0.7, abs=1e-10)
    assert np.ptp(sp.g_o) < 1e-12
    assert sp.m_meas @ sp.g_o == pytest.approx(1.0, abs=1e-14)


def test_iota_markov_zero_potential(mixed_zero):
    env = fixtures.build("markov-slow")
    rho = np.max(np.abs(np.linalg.eigvals(np.diag([2.0, 3.0]) @ env.transition)))
    assert iota_spectrum(mixed_zero, env, depth=3, N=N).beta == pytest.approx(rho, abs=1e-10)


def test_iota_depth_stability(cos_sys):
    env = fixtures.build("markov-slow")
    depths = np.arange(2, 6)
    gaps = [iota_spectrum(cos_sys, env, depth=int(m), N=N).depth_gap for m in depths]
    fit = geometric_fit(depths, gaps)
    # frozen from a depth sweep: gaps 4.1e-3, 9.6e-4, 2.3e-4, 5.7e-5
    assert fit.rate == pytest.approx(0.24, abs=0.03) and fit.r2 > 0.99


def test_convergence_cos_markov(cos_sys):
    rep = annealed_convergence(cos_sys, fixtures.build("markov-slow"), cos2pi, N=N)
    assert rep.fit.rate == pytest.approx(0.601, abs=0.01)
    assert rep.fit.r2 > 0.99
    assert rep.beta_hat == pytest.approx(3.3546, abs=1e-3)


def test_convergence_zero_potential(mixed_zero):
    env = fixtures.build("markov-slow")
    rep = annealed_convergence(mixed_zero, env, cos2pi, N=N)
    rho = np.max(np.abs(np.linalg.eigvals(np.diag([2.0, 3.0]) @ env.transition)))
    assert rep.beta_hat == pytest.approx(rho, abs=1e-8)
    assert abs(rep.pi_f) < 1e-12
    assert rep.fit is None


def test_convergence_constant_observable(cos_sys):
    rep = annealed_convergence(cos_sys, fixtures.build("markov-slow"), np.ones_like, N=N)
    assert np.max(rep.ratio_errors) <= 1e-9
    assert rep.pi_f == pytest.approx(1.0)


def test_decay_cos_markov(cos_sys, markov):
    rep = annealed_decay(cos_sys, markov, sin2pi, sin2pi, samples=100, rng=1, N=N)
    assert rep.fit is not None and rep.fit.rate < 1 and rep.fit.r2 > 0.95


def test_decay_zero_potential_vanishes(mixed_zero, bernoulli):
    rep = annealed_decay(mixed_zero, bernoulli, cos2pi, cos2pi, samples=30, rng=2, N=N)
    assert np.max(np.abs(rep.discrepancy)) < 1e-12
    assert rep.fit is None


def test_decay_constant_g(cos_sys, markov):
    rep = annealed_decay(cos_sys, markov, cos2pi, np.ones_like, samples=100, rng=3, N=N)
    assert np.all(np.abs(rep.discrepancy) <= rep.ci)


def test_decay_is_thread_independent(cos_sys, markov):
    a = annealed_decay(cos_sys, markov, sin2pi, sin2pi, range(1, 4), samples=12, rng=5, N=N)
    b = annealed_decay(cos_sys, markov, sin2pi, sin2pi, range(1, 4), samples=12, rng=5, N=N,
                       threads=3)
    assert np.array_equal(a.discrepancy, b.discrepancy)


def test_decay_needs_invariant_environment(cos_sys):
    env = MarkovEnvironment(np.array([0.5, 0.5]), np.array([[0.7, 0.3], [0.4, 0.6]]))
    with pytest.raises(SystemDefinitionError):
        annealed_decay(cos_sys, env, cos2pi, cos2pi, samples=2)


def test_dual_is_transpose_of_dp(cos_sys, markov):
    f = sample(lambda x: 1.5 + np.sin(2 * np.pi * x), N)
    for n in (1, 3, 6):
        nu, log_a1 = annealed_dual(cos_sys, markov, n, 0.0, N)
        An_f = annealed_apply(cos_sys, markov, n, f)
        An_1 = annealed_apply(cos_sys, markov, n, np.ones(N))
        assert nu @ f == pytest.approx(An_f[0] / An_1[0], rel=1e-12)
        assert log_a1 == pytest.approx(np.log(An_1[0]), rel=1e-12)


def test_equidistribution_zero_potential(mixed_zero, bernoulli):
    rep = equidistribution(mixed_zero, bernoulli, n_range=range(1, 31), N=N)
    assert rep.pressure[-1] == pytest.approx(np.log(2.5), abs=1e-12)
    assert wasserstein(rep.limit, lebesgue(N)) < 1e-12


def test_equidistribution_cos(cos_sys, markov):
    rep = equidistribution(cos_sys, markov, n_range=range(1, 21), N=N)
    assert rep.fit.rate < 1 and rep.fit.r2 > 0.95
    assert rep.distance[-1] < 1e-6


def test_pressure_helper(mixed_zero, bernoulli):
    assert semigroup_pressure(mixed_zero, bernoulli, 7, N) == pytest.approx(np.log(2.5))
    assert circle_nodes(4)[1] == 0.25
