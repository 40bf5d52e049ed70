import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from ruellelab.dynamics import (Word, apply_word_map, dstar, metric_constants, periodic_past,
                                periodic_word)
from ruellelab.fitting import geometric_fit
from ruellelab.grid import circle_nodes, dirac, lebesgue, sample
from ruellelab.measures import (bilateral_equilibrium, circle_w1, contraction_rate, dual_apply,
                                eigen_data, pushforward, quenched_conformal, wasserstein)
from ruellelab.transfer import assemble_matrix, normalized_quotient

OMEGA = periodic_word("12", 80)


def lp_dstar(mc, x, a, b):
    """Dense transportation LP between the supports of two atomic measures."""
    ia, ib = np.flatnonzero(a), np.flatnonzero(b)
    C = dstar(mc, x[ia][:, None], x[ib][None, :])
    n, m = len(ia), len(ib)
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a[ia], b[ib]]), bounds=(0, None),
                  method="highs")
    return res.fun


def test_wasserstein_trivial(cos_sys):
    mc = metric_constants(cos_sys)
    mu = np.random.default_rng(1).random(64)
    mu /= mu.sum()
    assert wasserstein(mu, mu) == 0.0
    assert wasserstein(mu, mu, "dstar", mc) == pytest.approx(0.0, abs=1e-14)
    assert wasserstein(dirac(64, 0.0), dirac(64, 0.5)) == pytest.approx(0.5)
    assert wasserstein(dirac(64, 0.0), dirac(64, 0.5), "dstar", mc) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wasserstein(mu, 2 * mu)


def test_dstar_matches_lp_oracle(cos_sys, rng):
    mc = metric_constants(cos_sys)
    x = circle_nodes(64)
    for _ in range(20):
        a, b = np.zeros(64), np.zeros(64)
        a[rng.choice(64, 8, replace=False)] = rng.random(8)
        b[rng.choice(64, 8, replace=False)] = rng.random(8)
        a /= a.sum()
        b /= b.sum()
        assert wasserstein(a, b, "dstar", mc) == pytest.approx(lp_dstar(mc, x, a, b), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=6),
       st.lists(st.floats(0, 1), min_size=1, max_size=6))
def test_circle_w1_rotation_invariant(xa, xb):
    wa = np.full(len(xa), 1 / len(xa))
    wb = np.full(len(xb), 1 / len(xb))
    d0 = circle_w1(xa, wa, xb, wb)
    d1 = circle_w1(np.add(xa, 0.3), wa, np.add(xb, 0.3), wb)
    assert d0 == pytest.approx(d1, abs=1e-9)
    assert 0 <= d0 <= 0.5 + 1e-12


def test_dual_preserves_lebesgue_for_zero_potential(mixed_zero):
    out = dual_apply(mixed_zero, "21", "1122", lebesgue(256))
    assert out == pytest.approx(lebesgue(256), abs=1e-15)


def test_duality_and_mass(cos_sys, rng):
    N = 256
    for _ in range(20):
        u = Word(rng.integers(1, 3, rng.integers(0, 4)))
        v = Word(rng.integers(1, 3, rng.integers(1, 7)))
        mu = rng.random(N)
        mu /= mu.sum()
        f = rng.normal(size=N)
        nu = dual_apply(cos_sys, u, v, mu)
        assert nu.sum() == pytest.approx(1.0, abs=1e-12)
        assert nu @ f == pytest.approx(mu @ normalized_quotient(cos_sys, u, v, f), abs=1e-6)


def test_conformal_zero_potential(mixed_zero):
    mu = quenched_conformal(mixed_zero, "1", OMEGA[:20], N=256, gap=False).measure
    assert wasserstein(mu, lebesgue(256)) < 1e-12


def test_conformal_independent_of_start(cos_sys):
    mc = metric_constants(cos_sys)
    gaps = []
    for l in (10, 20, 30):
        a = quenched_conformal(cos_sys, (), OMEGA[:l], gap=False).measure
        b = quenched_conformal(cos_sys, (), OMEGA[:l], start=lebesgue(1024), gap=False).measure
        gaps.append(wasserstein(a, b, "dstar", mc))
    # frozen from a depth sweep: 3.3e-4, 5.6e-9, 1.0e-13
    assert gaps[0] < 1e-3 and gaps[1] < 1e-7 and gaps[2] < 1e-11


def test_conformal_stability_in_omega(cos_sys):
    mc = metric_constants(cos_sys)
    ks = np.arange(2, 11, 2)
    d = []
    for k in ks:
        a = quenched_conformal(cos_sys, (), OMEGA[:k] + "1" * 40, gap=False).measure
        b = quenched_conformal(cos_sys, (), OMEGA[:k] + "2" * 40, gap=False).measure
        d.append(wasserstein(a, b, "dstar", mc))
    fit = geometric_fit(ks, d)
    assert fit.rate < 0.5 and fit.r2 > 0.95


def test_eigen_data_zero_potential(mixed_zero):
    e = eigen_data(mixed_zero, "12", OMEGA[:30], N=256)
    assert e.lam == pytest.approx(6.0, abs=1e-8)
    assert e.mu_omega @ e.h == pytest.approx(1.0, abs=1e-12)


def test_cocycle_and_pushforward(cos_sys):
    N, l = 1024, 40
    for u, v in [("1", "2"), ("12", "21"), ("2", "112")]:
        uv = Word(u) + v
        lam_uv = eigen_data(cos_sys, uv, OMEGA, l, N).lam
        lam_u = eigen_data(cos_sys, u, Word(v) + OMEGA, l, N).lam
        lam_v = eigen_data(cos_sys, v, OMEGA, l, N).lam
        assert abs(lam_uv - lam_u * lam_v) <= 1e-6 * lam_uv
    for u in ("1", "12", "21"):
        mu_u = quenched_conformal(cos_sys, u, OMEGA[:l], N=N, gap=False).measure
        mu_uom = quenched_conformal(cos_sys, (), (Word(u) + OMEGA)[:l + len(u)], N=N,
                                    gap=False).measure
        x, m = pushforward(cos_sys, u, mu_uom)
        assert circle_w1(x, m, circle_nodes(N), mu_u) <= 2 / N


def test_bilateral_zero_potential_is_lebesgue(mixed_zero):
    qm = bilateral_equilibrium(mixed_zero, periodic_past("12", 20), OMEGA[:20], N=256, gap=False)
    assert qm.measure == pytest.approx(lebesgue(256), abs=1e-14)


def test_bilateral_invariance(cos_sys):
    f = lambda x: np.cos(2 * np.pi * x) + np.sin(6 * np.pi * x)  # noqa: E731
    x = circle_nodes(1024)
    for w, tol in (("1", 1e-5), ("12", 2e-4), ("122", 2e-3)):
        qm = bilateral_equilibrium(cos_sys, periodic_past(w, 40), periodic_word(w, 40), N=1024,
                                   gap=False)
        assert abs(qm.measure @ f(apply_word_map(cos_sys, w, x)) - qm.measure @ f(x)) < tol


def test_single_letter_matches_dense_eigensolver(cos_sys):
    N = 512
    w, VL, VR = sla.eig(assemble_matrix(cos_sys, "1", N), left=True, right=True)
    i = np.argmax(w.real)
    mu = np.abs(VR[:, i].real) * np.abs(VL[:, i].real)
    mu /= mu.sum()
    qm = bilateral_equilibrium(cos_sys, periodic_past("1", 40), periodic_word("1", 40), N=N,
                               gap=False)
    assert wasserstein(mu, qm.measure) <= 1e-4
    lam = eigen_data(cos_sys, "1", periodic_word("1", 40), N=N).lam
    assert lam == pytest.approx(w[i].real, rel=1e-8)


def test_contraction_rate_zero_potential(mixed_zero):
    cf = contraction_rate(mixed_zero, trials=4, lengths=range(1, 13), rng=0, N=256,
                          kind="function")
    assert 0 < cf.s_hat < 1


def test_density_convergence(cos_sys):
    # ||h_{_k[sigma], omega} - h_{sigma, omega}|| decays geometrically in k
    past = periodic_past("21", 40)
    ref = bilateral_equilibrium(cos_sys, past, OMEGA[:40], gap=False).density
    ks = np.arange(1, 9)
    err = [np.max(np.abs(bilateral_equilibrium(cos_sys, past, OMEGA[:40], k=int(k),
                                               gap=False).density - ref)) for k in ks]
    fit = geometric_fit(ks, err, 1e-13)
    assert fit.rate < 0.6 and fit.r2 > 0.9


def test_sample_helper():
    assert sample(np.sin, 8).shape == (8,)
