import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab.dynamics import periodic_word
from ruellelab.measures import contraction_rate
from ruellelab.stats import (build_decomposition, float_orbit, quenched_clt_check,
                             quenched_correlation_decay, sample_grid_measure, variance_growth,
                             weierstrass)

from conftest import cos2pi

ALT = periodic_word("12", 400)


def test_constant_observable_is_degenerate(cos_sys):
    dec = build_decomposition(cos_sys, ALT, np.ones_like, 50, N=256)
    assert np.max(np.abs(dec.f_n)) < 1e-12
    assert np.max(np.abs(dec.h)) < 1e-12 and np.max(np.abs(dec.u)) < 1e-12
    assert np.max(dec.s_sq) < 1e-20
    rep = quenched_clt_check(cos_sys, ALT, np.ones_like, n=50, N=256, dec=dec)
    assert rep.status == "degenerate"


def test_doubling_zero_potential_decomposition(doubling):
    dec = build_decomposition(doubling, "1" * 100, cos2pi, 60, N=512)
    assert np.max(np.abs(dec.means)) < 1e-14
    assert np.max(np.abs(dec.h)) < 1e-13
    assert dec.s_sq[1:] / np.arange(1, 61) == pytest.approx(0.5, abs=1e-12)
    assert dec.sigma_sq == pytest.approx(dec.s_sq, abs=1e-12)


def test_conditional_expectation_identity(doubling_cos):
    dec = build_decomposition(doubling_cos, "1" * 100, cos2pi, 50, N=1024, scheme="cubic")
    for n in (5, 20, 40):
        for q in range(1, 11):
            psi = lambda x, q=q: np.cos(2 * np.pi * q * x + q)  # noqa: E731
            assert abs(dec.orthogonality(doubling_cos, n, psi)) <= 1e-6


def test_telescoping(doubling_cos, rng):
    dec = build_decomposition(doubling_cos, "1" * 100, cos2pi, 50, N=1024)
    orbit = dec.sample_orbits(doubling_cos, 50, 200, rng)
    assert dec.telescoping_error(orbit, 50) <= 1e-10


def test_sampled_orbits_are_orbits(doubling_cos, rng):
    dec = build_decomposition(doubling_cos, "1" * 60, cos2pi, 20, N=256)
    orbit = dec.sample_orbits(doubling_cos, 20, 50, rng)
    fwd = float_orbit(doubling_cos, "1" * 20, orbit[0], 20)
    # forward iteration loses one bit per step, so only compare early times
    d = np.abs(np.mod(fwd[:10] - orbit[:10] + 0.5, 1.0) - 0.5)
    assert d.max() < 1e-9


def test_variance_growth(doubling_cos):
    dec = build_decomposition(doubling_cos, "1" * 240, cos2pi, 200, N=1024)
    vg = variance_growth(dec)
    assert vg.gamma == pytest.approx(1.0, abs=0.05) and vg.r2 > 0.999
    assert vg.summable_hint
    assert np.max(dec.h_sup) < 2.0


def test_clt_alternating_mixed_system(cos_sys):
    rep = quenched_clt_check(cos_sys, ALT, cos2pi, n=100, samples=4000, rng=0, N=512)
    assert 0.9 <= rep.variance_ratio <= 1.1
    assert rep.ks_distance < 0.05


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(8, 64))
def test_grid_sampling_mean(seed, N):
    mu = np.random.default_rng(seed).random(N)
    mu /= mu.sum()
    x = sample_grid_measure(mu, 20_000, np.random.default_rng(seed + 1))
    assert np.all((x >= 0) & (x < 1))
    # the hat-function density reproduces the circular first moment of mu
    nodes = np.arange(N) / N
    expect = mu @ np.exp(2j * np.pi * nodes) * (np.sinc(1 / N) ** 2)
    assert abs(np.mean(np.exp(2j * np.pi * x)) - expect) < 0.03


def test_correlation_decay_weierstrass(doubling):
    J = 10
    rep = quenched_correlation_decay(doubling, "1" * 80, weierstrass(J), range(1, J + 1), N=1024)
    exact = np.array([sum(0.5 ** j for j in range(n, J)) for n in range(1, J + 1)])
    assert rep.errors == pytest.approx(exact, abs=1e-12)
    assert rep.fit.rate == pytest.approx(0.5, abs=0.05)


def test_correlation_decay_constant(cos_sys):
    rep = quenched_correlation_decay(cos_sys, ALT, np.ones_like, range(1, 11))
    assert np.max(rep.errors) < 1e-13 and rep.fit is None


def test_correlation_rate_below_contraction_rate(cos_sys):
    rep = quenched_correlation_decay(cos_sys, ALT, cos2pi, range(1, 21))
    cf = contraction_rate(cos_sys, trials=6, rng=4, kind="measure", N=512)
    assert rep.fit.rate < 1
    assert rep.fit.rate <= cf.s_hat
