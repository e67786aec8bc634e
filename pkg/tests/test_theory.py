from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fclt.contour import make_contour
from fclt.errors import DimensionMismatch, KernelPole, NotPSD
from fclt.functions import PowerSeries, eval_series, monomial
from fclt.theory import (
    CovarianceModel,
    TestPair,
    contour_covariance,
    covariance_model,
    kernel_V,
    kernel_Vcirc,
    limit_sampler,
    mean_prediction,
    resolvent_covariance,
    resolvent_mean_prediction,
)

N = 8
EYE = np.eye(N)
SHIFT = np.roll(np.eye(N), 1, axis=1)
ALT = np.diag((-1.0) ** np.arange(N))


def test_kernel_values():
    assert kernel_V(2, 2) == pytest.approx(1 / 9)
    assert kernel_Vcirc(2, 2) == pytest.approx(1 / 12)


@settings(max_examples=40, deadline=None)
@given(
    z=st.complex_numbers(min_magnitude=1.1, max_magnitude=3, allow_nan=False, allow_infinity=False),
    w=st.complex_numbers(min_magnitude=1.1, max_magnitude=3, allow_nan=False, allow_infinity=False),
)
def test_kernel_conjugate_symmetry(z, w):
    assert kernel_Vcirc(z, w) == pytest.approx(np.conj(kernel_Vcirc(w, z)), rel=1e-12)
    assert kernel_V(z, w) == pytest.approx(np.conj(kernel_V(w, z)), rel=1e-12)


def test_kernel_poles():
    with pytest.raises(KernelPole):
        kernel_V(1, 1)
    with pytest.raises(KernelPole):
        kernel_Vcirc(0, 2)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_variance_k(k):
    model = covariance_model([TestPair(monomial(k), EYE)])
    assert model.cov[0, 0] == pytest.approx(k)
    assert np.all(model.pseudo == 0)


def test_shift_variance_one():
    assert covariance_model([TestPair(monomial(1), SHIFT)]).cov[0, 0] == pytest.approx(1)


def test_real_class_pseudo():
    # real coefficients and real A: pseudo-covariance equals covariance
    model = covariance_model([TestPair(monomial(2), EYE), TestPair(monomial(1), ALT)], "real")
    assert np.allclose(model.pseudo, model.cov)
    # purely imaginary coefficients flip the sign
    model = covariance_model([TestPair(PowerSeries([0, 1j]), EYE)], "real")
    assert model.pseudo[0, 0] == pytest.approx(-1)


def test_resolvent_covariance_examples():
    assert resolvent_covariance(2, 2, EYE, EYE)[0] == pytest.approx(1 / 9)
    assert resolvent_covariance(2, 2, SHIFT, SHIFT)[0] == pytest.approx(1 / 12)
    assert resolvent_covariance(2, 2, EYE, ALT)[0] == 0
    cov, pseudo = resolvent_covariance(2, 2, EYE, EYE, "real")
    assert pseudo == pytest.approx(1 / 9)
    cov, pseudo = resolvent_covariance(2j, 2j, EYE, EYE, "real")
    assert pseudo == pytest.approx(kernel_V(2j, -2j))
    with pytest.raises(ValueError):
        resolvent_covariance(0.5, 2, EYE, EYE)


def test_mean_examples():
    assert mean_prediction(monomial(2), EYE, 256, "real") == pytest.approx(1)
    assert mean_prediction(monomial(2), EYE, 256, "complex") == 0
    a = np.diag(np.linspace(0, 1, N))
    for sym in ("complex", "real"):
        assert mean_prediction(PowerSeries([1.0]), a, 100, sym) == pytest.approx(100 * np.trace(a) / N)
    assert resolvent_mean_prediction(2, EYE, 256) == pytest.approx(-128)
    assert resolvent_mean_prediction(2, EYE, 256, "real") + 128 == pytest.approx(-1 / 6)


@settings(max_examples=30, deadline=None)
@given(
    c=st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=1, max_size=6),
    d=st.lists(st.floats(-1, 1), min_size=N, max_size=N),
)
def test_mean_dichotomy(c, d):
    f = PowerSeries(c)
    a = np.diag(d)
    tr = np.trace(a) / N
    diff = mean_prediction(f, a, 64, "real") - mean_prediction(f, a, 64, "complex")
    expect = tr * ((eval_series(f, 1.0) + eval_series(f, -1.0)) / 2 - f.coefficients[0])
    assert diff == pytest.approx(expect, abs=1e-12)


def test_contour_covariance_monomials():
    c = make_contour(1.25, 256)
    pairs = [TestPair(monomial(k), EYE) for k in range(1, 5)]
    for sym in ("complex", "real"):
        model = covariance_model(pairs, sym)
        cov, pseudo = contour_covariance(pairs, c, sym)
        assert np.max(np.abs(cov - model.cov)) <= 1e-8
        assert np.max(np.abs(pseudo - model.pseudo)) <= 1e-8


def random_pairs(seed, count, n=N):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        coef = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a /= np.linalg.norm(a, 2)
        pairs.append(TestPair(PowerSeries(coef), a, f"p{i}"))
    return pairs


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), count=st.integers(1, 4), sym=st.sampled_from(["complex", "real"]))
def test_model_psd_and_contour(seed, count, sym):
    pairs = random_pairs(seed, count)
    model = covariance_model(pairs, sym)
    assert np.allclose(model.cov, model.cov.conj().T)
    assert np.allclose(model.pseudo, model.pseudo.T)
    lam_c, lam_r = model.min_eigenvalues()
    assert lam_c >= -1e-10 and lam_r >= -1e-10
    cov, pseudo = contour_covariance(pairs, make_contour(1.25, 256), sym)
    assert np.max(np.abs(cov - model.cov)) <= 1e-8 * max(1, np.abs(model.cov).max())
    assert np.max(np.abs(pseudo - model.pseudo)) <= 1e-8 * max(1, np.abs(model.cov).max())


def test_testpair_decomposition_and_warning():
    p = TestPair(monomial(1), np.diag([1.0, 0.0, 0.5, 0.5]))
    assert abs(np.trace(p.traceless) / 4) <= 1e-14
    assert p.trace == 0.5
    with pytest.warns(UserWarning):
        TestPair(monomial(1), 2 * np.eye(3))
    with pytest.raises(DimensionMismatch):
        covariance_model([TestPair(monomial(1), np.eye(2)), TestPair(monomial(1), np.eye(3))])


def test_sampler_complex_unit():
    model = CovarianceModel("complex", (), np.eye(1, dtype=complex), np.zeros((1, 1), dtype=complex))
    m = 100_000
    xi = limit_sampler(model, m, 1)[:, 0]
    assert abs(np.mean(np.abs(xi) ** 2) - 1) <= 4 / np.sqrt(m)
    assert abs(np.mean(xi**2)) <= 4 / np.sqrt(m)


def test_sampler_real_class():
    model = CovarianceModel("real", (), np.ones((1, 1), dtype=complex), np.ones((1, 1), dtype=complex))
    m = 100_000
    xi = limit_sampler(model, m, 2)[:, 0]
    assert abs(np.mean(xi**2) - 1) <= 4 / np.sqrt(m)
    assert np.max(np.abs(xi.imag)) <= 1e-6


def test_sampler_zero_and_determinism():
    model = CovarianceModel("complex", (), np.zeros((2, 2), dtype=complex), np.zeros((2, 2), dtype=complex))
    assert np.all(limit_sampler(model, 10, 0) == 0)
    m2 = covariance_model(random_pairs(0, 3), "real")
    assert np.array_equal(limit_sampler(m2, 5, 7), limit_sampler(m2, 5, 7))


def test_sampler_matches_model():
    model = covariance_model(random_pairs(3, 2), "real")
    m = 200_000
    xi = limit_sampler(model, m, 4)
    emp_cov = xi.T @ xi.conj() / m
    emp_pseudo = xi.T @ xi / m
    scale = np.abs(model.cov).max()
    assert np.max(np.abs(emp_cov - model.cov)) <= 0.02 * scale
    assert np.max(np.abs(emp_pseudo - model.pseudo)) <= 0.02 * scale


def test_not_psd():
    bad = CovarianceModel("complex", (), -np.eye(1, dtype=complex), np.zeros((1, 1), dtype=complex))
    with pytest.raises(NotPSD):
        bad.check_psd()
    with pytest.raises(NotPSD):
        limit_sampler(bad, 3, 0)
    with pytest.raises(ValueError):
        covariance_model([], "quaternion")
