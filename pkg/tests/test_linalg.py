from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fclt.errors import DimensionMismatch, NotPositiveDefinite
from fclt.linalg import cholesky, normalized_trace, smallest_singular_value, solve, trace_product


def random_pd(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return b @ b.conj().T + n * np.eye(n)


def jacobi_singular_values(a, sweeps=60):
    """One-sided Jacobi SVD: rotate column pairs until mutually orthogonal."""
    u = np.array(a, dtype=complex)
    n = u.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = np.vdot(u[:, p], u[:, p]).real
                beta = np.vdot(u[:, q], u[:, q]).real
                gamma = np.vdot(u[:, p], u[:, q])
                if abs(gamma) == 0.0:
                    continue
                off = max(off, abs(gamma) / np.sqrt(alpha * beta))
                phase = gamma / abs(gamma)
                zeta = (beta - alpha) / (2.0 * abs(gamma))
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up = u[:, p].copy()
                uq = u[:, q] * np.conj(phase)
                u[:, p] = c * up - s * uq
                u[:, q] = (s * up + c * uq) * phase
        if off < 1e-15:
            break
    return np.sort(np.linalg.norm(u, axis=0))


def test_jacobi_oracle_is_sane():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    assert np.allclose(jacobi_singular_values(a), np.sort(np.linalg.svd(a, compute_uv=False)), rtol=1e-12)


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky(np.eye(3)).lower, np.eye(3))

    def test_diagonal(self):
        assert np.allclose(cholesky(np.diag([4.0, 9.0])).lower, np.diag([2.0, 3.0]))

    def test_reconstruction(self):
        h = random_pd(8, 1)
        f = cholesky(h, with_inverse=True)
        assert np.max(np.abs(f.reconstruct() - h)) <= 1e-10 * np.max(np.abs(h))
        assert np.allclose(f.lower_inv @ f.lower, np.eye(8), atol=1e-12)

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, -1.0]))

    def test_not_hermitian(self):
        with pytest.raises(ValueError):
            cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))


class TestSolve:
    def test_identity(self):
        b = np.arange(6.0).reshape(3, 2)
        assert np.allclose(solve(cholesky(np.eye(3)), b), b)

    def test_diag(self):
        assert np.allclose(solve(cholesky(2 * np.eye(2)), np.eye(2)), 0.5 * np.eye(2))

    def test_residual(self):
        h = random_pd(8, 2)
        b = np.random.default_rng(3).standard_normal((8, 3))
        x = solve(cholesky(h), b)
        assert np.linalg.norm(h @ x - b) <= 1e-9 * np.linalg.norm(b)

    def test_apply_inverse_matches_solve(self):
        h = random_pd(8, 4)
        b = np.random.default_rng(5).standard_normal((8, 2)) + 0j
        assert np.allclose(cholesky(h, with_inverse=True).apply_inverse(b), solve(cholesky(h), b))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve(cholesky(np.eye(3)), np.ones((4, 1)))

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 12), seed=st.integers(0, 10**6))
    def test_solve_inverts(self, n, seed):
        h = random_pd(n, seed)
        b = np.random.default_rng(seed + 1).standard_normal((n, 2))
        x = solve(cholesky(h), h @ b)
        assert np.linalg.norm(x - b) <= 1e-9 * np.linalg.norm(b)


class TestSmallestSingularValue:
    def test_identity(self):
        assert smallest_singular_value(np.eye(5)) == pytest.approx(1.0, rel=1e-8)

    def test_diag(self):
        assert smallest_singular_value(np.diag([3.0, 1.0, 7.0])) == pytest.approx(1.0, rel=1e-8)

    def test_against_jacobi_oracle(self):
        rng = np.random.default_rng(16)
        y = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        expect = jacobi_singular_values(y)[0]
        assert smallest_singular_value(y, tol=1e-12) == pytest.approx(expect, rel=1e-6)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(2, 16), seed=st.integers(0, 10**6))
    def test_constructed_svd(self, n, seed):
        rng = np.random.default_rng(seed)
        u, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        d = rng.uniform(0.1, 3.0, n)
        y = u @ np.diag(d) @ v.conj().T
        assert abs(smallest_singular_value(y, tol=1e-12) - d.min()) <= 1e-6


class TestTraceProduct:
    def test_identity(self):
        b = np.random.default_rng(0).standard_normal((4, 4))
        assert trace_product(np.eye(4), b) == pytest.approx(np.trace(b))

    def test_diag(self):
        d = np.diag([1.0, 2.0])
        assert trace_product(d, d) == 5

    def test_explicit_product(self):
        rng = np.random.default_rng(8)
        a, b = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)) for _ in range(2))
        ref = np.trace(a @ b)
        assert abs(trace_product(a, b) - ref) <= 1e-12 * abs(ref) * 10

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            trace_product(np.eye(2), np.eye(3))

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 10), seed=st.integers(0, 10**6))
    def test_symmetric_exactly(self, n, seed):
        rng = np.random.default_rng(seed)
        a, b = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(2))
        assert trace_product(a, b) == trace_product(b, a)


def test_normalized_trace():
    assert normalized_trace(np.diag([1.0, 3.0])) == 2.0
