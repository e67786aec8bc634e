"""Dense complex linear algebra used by the resolvent computations.

Matrices are plain square ``numpy`` arrays.  The heavy lifting is done by
LAPACK (``potrf``/``potrs``/``trtri``); this module adds the checks and the
inverse (subspace) power iteration for the smallest singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, solve_triangular

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, SingularMatrix

HERMITIAN_TOL = 1e-12
# Fixed seed for the non-constant start columns of the inverse iteration.
RESTART_SEED = 20201
# Block width of the inverse subspace iteration (doubled on restart).
BLOCK_WIDTH = 4

__all__ = [
    "HermitianFactor",
    "as_square",
    "cholesky",
    "normalized_trace",
    "smallest_singular_value",
    "solve",
    "trace_product",
]


def as_square(a, name="matrix"):
    """Return ``a`` as a square complex-or-real ndarray, rejecting NaN/Inf."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def normalized_trace(a):
    """``<A> = Tr(A) / N``."""
    a = np.asarray(a)
    return complex(np.trace(a)) / a.shape[0]


@dataclass(frozen=True)
class HermitianFactor:
    """Lower Cholesky factor ``L`` with ``H = L L*``.

    ``lower_inv`` holds ``L^{-1}`` when the factor was built with
    ``with_inverse=True``; it turns repeated solves into matrix products.
    """

    lower: np.ndarray
    lower_inv: np.ndarray | None = None

    @property
    def n(self):
        return self.lower.shape[0]

    def apply_inverse(self, b):
        """``H^{-1} b`` for a vector or a matrix ``b``."""
        if self.lower_inv is not None:
            li = self.lower_inv
            # L^{-*} w = conj(L^{-T} conj(w)); avoids materializing L^{-*}
            return np.conj(li.T @ np.conj(li @ b))
        y = solve_triangular(self.lower, b, lower=True, check_finite=False)
        return solve_triangular(self.lower, y, lower=True, trans="C", check_finite=False)

    def reconstruct(self):
        return self.lower @ self.lower.conj().T


def cholesky(h, with_inverse=False, check_hermitian=True):
    """Cholesky factorization of a Hermitian positive-definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If LAPACK meets a non-positive pivot.
    """
    h = as_square(h, "H")
    if check_hermitian:
        scale = max(1.0, float(np.max(np.abs(h))))
        if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL * scale:
            raise ValueError("H is not Hermitian within tolerance")
    # only the lower triangle of h is read
    (potrf,) = get_lapack_funcs(("potrf",), (h,))
    low, info = potrf(h, lower=True, clean=True, overwrite_a=False)
    if info > 0:
        raise NotPositiveDefinite(f"non-positive pivot at position {info}")
    if info < 0:
        raise ValueError(f"potrf: illegal argument {-info}")
    inv = None
    if with_inverse:
        (trtri,) = get_lapack_funcs(("trtri",), (low,))
        inv, info = trtri(low, lower=True)
        if info != 0:
            raise NotPositiveDefinite(f"trtri failed with info={info}")
    return HermitianFactor(lower=low, lower_inv=inv)


def solve(factor, b):
    """Return ``H^{-1} B`` where ``factor`` is the Cholesky factor of ``H``."""
    b = np.asarray(b)
    if b.shape[0] != factor.n:
        raise DimensionMismatch(f"factor is {factor.n}x{factor.n}, rhs has {b.shape[0]} rows")
    (potrs,) = get_lapack_funcs(("potrs",), (factor.lower, b))
    x, info = potrs(factor.lower, b, lower=True)
    if info != 0:
        raise ValueError(f"potrs: illegal argument {-info}")
    return x


def trace_product(a, b):
    """``Tr(AB) = sum_ij A_ij B_ji`` without forming ``AB``.

    The elementwise products are symmetrized before the reduction, so
    ``trace_product(a, b) == trace_product(b, a)`` holds bit for bit.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape != b.T.shape:
        raise DimensionMismatch(f"cannot trace {a.shape} against {b.shape}")
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        # explicit real arithmetic: a fused complex multiply is not bitwise commutative
        ar, ai, br, bi = a.real, a.imag, b.T.real, b.T.imag
        p = (ar * br - ai * bi) + 1j * (ar * bi + ai * br)
    else:
        p = a * b.T
    return complex(np.sum(p + p.T)) / 2


def _ritz_lower_bound(apply_inv, x0, tol, max_iter):
    # Inverse subspace iteration: power iteration on H^{-1} applied to the
    # block x0, with Rayleigh-Ritz extraction of the top Ritz pair.  Stops
    # once the top Ritz value mu changes by less than tol relative, or the
    # eigen-residual is that small.  Returns (mu, rho, iterations, converged)
    # with rho the residual norm of the top Ritz vector: some eigenvalue of
    # H^{-1} lies in [mu - rho, mu + rho].  The block makes clustered
    # smallest singular values converge at the rate of the first gap outside
    # the block rather than stall.
    q, _ = np.linalg.qr(x0)
    mu = rho = np.nan
    prev = None
    for it in range(1, max_iter + 1):
        y = apply_inv(q)
        if not np.all(np.isfinite(y)):
            raise SingularMatrix("inverse iteration produced a non-finite iterate")
        t = q.conj().T @ y
        evals, evecs = np.linalg.eigh((t + t.conj().T) / 2)
        mu = float(evals[-1])
        s = evecs[:, -1]
        rho = float(np.linalg.norm(y @ s - mu * (q @ s)))
        if mu <= 0.0:
            raise SingularMatrix("inverse iteration lost positivity")
        if rho <= tol * mu or (prev is not None and abs(mu - prev) <= tol * mu):
            return mu, rho, it, True
        prev = mu
        q, _ = np.linalg.qr(y)
    return mu, rho, max_iter, False


def _start_block(n, width, seed):
    # all-ones first column, then fixed-seed Gaussian columns
    rng = np.random.default_rng(seed)
    block = np.empty((n, width), dtype=complex)
    block[:, 0] = 1.0
    if width > 1:
        block[:, 1:] = rng.standard_normal((n, width - 1)) + 1j * rng.standard_normal((n, width - 1))
    return block


def smallest_singular_value(y, tol=1e-8, max_iter=500, factor=None, shift=0.0):
    """Smallest singular value of ``Y`` by inverse power iteration on ``Y Y*``.

    The iteration runs on a block of ``BLOCK_WIDTH`` vectors (the normalized
    all-ones vector plus fixed-seed columns) with Rayleigh-Ritz extraction,
    and restarts once with a wider block on stagnation.

    Parameters
    ----------
    y : (n, n) array
    tol : float
        Stop once the Rayleigh quotient changes by less than ``tol``
        relative (or the eigen-residual falls below that level).
    factor : HermitianFactor, optional
        A precomputed Cholesky factor of ``Y Y* + shift``; saves the
        factorization when the caller already has it.
    shift : float
        The diagonal shift baked into ``factor``.

    Returns
    -------
    float
        A lower-bound estimate ``sqrt(1/(mu + rho) - shift)`` built from the
        top Ritz value ``mu`` and residual ``rho`` of the final iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = as_square(y, "Y")
    n = y.shape[0]
    if factor is None:
        gram = y @ y.conj().T
        try:
            factor = cholesky(gram, with_inverse=False, check_hermitian=False)
            shift = 0.0
        except NotPositiveDefinite:
            shift = 1e-14 * max(1.0, float(np.max(np.abs(gram))))
            try:
                factor = cholesky(gram + shift * np.eye(n), check_hermitian=False)
            except NotPositiveDefinite as exc:
                raise SingularMatrix("Y Y* is numerically singular") from exc

    width = min(BLOCK_WIDTH, n)
    mu, rho, _, ok = _ritz_lower_bound(factor.apply_inverse, _start_block(n, width, RESTART_SEED), tol, max_iter)
    if not ok:
        # restart once with a wider deterministic block
        width = min(2 * BLOCK_WIDTH, n)
        mu, rho, _, ok = _ritz_lower_bound(
            factor.apply_inverse, _start_block(n, width, RESTART_SEED + 1), tol, max_iter
        )
        if not ok:
            raise NoConvergence(
                f"inverse iteration did not converge in {max_iter} steps", residual=rho / abs(mu)
            )
    lam = 1.0 / (mu + rho) - shift
    return float(np.sqrt(max(lam, 0.0)))
