from __future__ import annotations

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fclt.dyson import (
    NORM_BOUND,
    asymptotic_m_matrix,
    beta_product_expansion,
    eta_scaling_ratio,
    m_matrix,
    solve_m_u,
    stability_betas,
    two_resolvent_approx,
)
from fclt.errors import NoConvergence

# ||m_matrix - asymptotic form|| <= C eta^2 for eta <= 1e-4, |z| >= 1.2; fitted once on a
# 19 x 7 polar grid (max 6.198 at |z| = 1.2) and frozen with a small margin.
ASYMPTOTIC_C = 6.5
ROUNDOFF_FLOOR = 1e-13

zs_outside = st.builds(
    lambda r, t: cmath.rect(r, t), st.floats(1.1, 3.0), st.floats(0, 2 * np.pi)
)


def test_z2_example():
    eta = 1e-4
    b = solve_m_u(2, eta)
    assert abs(b.m - 1j * eta / 3) <= 10 * eta**2
    assert abs(b.u - 0.25) <= 10 * eta**2
    assert b.m.imag > 0


def test_m_matrix_limit_form():
    mm = m_matrix(solve_m_u(2, 1e-10))
    assert np.allclose(mm, [[0, -0.5], [-0.5, 0]], atol=1e-9)
    assert np.max(np.abs(mm)) <= NORM_BOUND


def test_eta_scaling_ratio():
    assert eta_scaling_ratio(2, 1e-4) == pytest.approx(4, abs=0.2)


def test_m_alone_deviation_is_cubic():
    # the diagonal entry m has no eta^2 term: its deviation scales as eta^3
    d1 = abs(solve_m_u(2, 1e-4).m - 1e-4j / 3)
    d2 = abs(solve_m_u(2, 2e-4).m - 2e-4j / 3)
    assert d2 / d1 == pytest.approx(8, abs=0.1)


def test_residual_grid():
    rng = np.random.default_rng(0)
    for _ in range(100):
        z = cmath.rect(rng.uniform(1.1, 3), rng.uniform(0, 2 * np.pi))
        eta = 10 ** rng.uniform(-8, -2)
        b = solve_m_u(z, eta)
        assert b.relative_residual <= 1e-12
        assert b.residual <= 1e-12
        assert b.u == b.m / (1j * eta + b.m)
        assert b.within_norm_bound


@settings(max_examples=40, deadline=None)
@given(z=st.builds(lambda r, t: cmath.rect(r, t), st.floats(1.2, 3.0), st.floats(0, 2 * np.pi)),
       eta=st.floats(1e-7, 1e-4))
def test_asymptotic_regression_bound(z, eta):
    d = np.max(np.abs(m_matrix(solve_m_u(z, eta)) - asymptotic_m_matrix(z, eta)))
    assert d <= ASYMPTOTIC_C * eta**2 + ROUNDOFF_FLOOR


def test_betas_examples():
    b1, b2 = stability_betas(np.sqrt(2), np.sqrt(2), 1e-10)
    assert abs(b1 * b2 - 0.25) <= 1e-8
    b1, b2 = stability_betas(2, 2, 1e-10)
    assert b1 == pytest.approx(0.75, abs=1e-8) and b2 == pytest.approx(0.75, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(z=zs_outside, w=zs_outside, eta=st.floats(1e-6, 1e-2))
def test_beta_product_expansion(z, w, eta):
    bz, bw = solve_m_u(z, eta), solve_m_u(w, eta)
    b1, b2 = stability_betas(z, w, eta, bz, bw)
    assert abs(b1 * b2 - beta_product_expansion(bz, bw)) <= 1e-10


def test_two_resolvent_examples():
    eta = 1e-8
    m = two_resolvent_approx((1, 1), 1.0, 2, 2, eta)
    assert abs(m.block_traces[1] - 1 / 3) <= 1e-7
    assert abs(m.block_traces[0]) <= 1e-7
    off = two_resolvent_approx((1, 2), 1.0, 2, 2, eta)
    assert max(abs(t) for t in off.block_traces) <= 10 * eta
    off2 = two_resolvent_approx((1, 2), 1.0, 2, 2, 1e-4)
    assert max(abs(t) for t in off2.block_traces) <= 10 * 1e-4


@settings(max_examples=40, deadline=None)
@given(
    z=zs_outside,
    w=zs_outside,
    tr=st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
    block=st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)]),
    eta=st.floats(1e-6, 1e-2),
)
def test_relation_residual(z, w, tr, block, eta):
    assert two_resolvent_approx(block, tr, z, w, eta).relation_residual() <= 1e-10


def test_block_matrix_shape():
    m = two_resolvent_approx((2, 1), 1.0, 1.5, 2j, 1e-3)
    a = np.eye(4)
    assert m.block_matrix(1, 2, a).shape == (4, 4)


def test_errors():
    with pytest.raises(ValueError):
        solve_m_u(0.5, 1e-3)
    with pytest.raises(ValueError):
        solve_m_u(2, 0.0)
    with pytest.raises(NoConvergence):
        solve_m_u(1.0001, 1e-9, max_iter=2)
    with pytest.raises(ValueError):
        two_resolvent_approx((3, 1), 1.0, 2, 2, 1e-3)
