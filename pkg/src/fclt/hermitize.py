"""Resolvent blocks of the Hermitization ``W_z = [[0, X - z], [(X - z)*, 0]]``.

With ``Y = X - z`` and ``K = Y Y* + eta^2`` the resolvent ``G_z(i eta)`` has
the blocks

    G^[11] = i eta K^{-1}          G^[12] = K^{-1} Y
    G^[21] = Y* K^{-1}             G^[22] = i eta (Y* Y + eta^2)^{-1}

so a single Cholesky factorization of the ``N x N`` positive-definite ``K``
serves three of the four blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import zherk as herk
from scipy.linalg.blas import ztrmm as trmm

from .dyson import m_matrix, solve_m_u
from .contour import make_contour
from .errors import NotPositiveDefinite, SingularMatrix
from .linalg import HermitianFactor, as_square, cholesky, smallest_singular_value, trace_product

OUTER_RING_NODES = 8
SIGMA_TOL = 1e-8

__all__ = [
    "OmegaVerdict",
    "ResolventWorkspace",
    "default_eta",
    "girko_free_error",
    "local_law_errors",
    "monomial_structure",
    "omega_check",
    "resolvent_block_trace",
    "spectral_norm",
]


def default_eta(n):
    return float(n) ** -2


@dataclass(frozen=True, eq=False)
class ResolventWorkspace:
    """Cached factorization of ``(X - z)(X - z)* + eta^2`` for one ``(X, z, eta)``."""

    x: np.ndarray
    z: complex
    eta: float
    factor: HermitianFactor = field(repr=False)

    @classmethod
    def build(cls, x, z, eta=None):
        x = as_square(x, "X")
        n = x.shape[0]
        eta = default_eta(n) if eta is None else float(eta)
        if not eta > 0:
            raise ValueError("eta must be positive")
        y = (x - complex(z) * np.eye(n)).astype(complex)
        k = herk(1.0, y, lower=1)  # lower triangle of Y Y*
        k[np.diag_indices(n)] += eta * eta
        factor = cholesky(k, with_inverse=True, check_hermitian=False)
        return cls(x=x, z=complex(z), eta=eta, factor=factor)

    @property
    def n(self):
        return self.x.shape[0]

    @cached_property
    def y(self):
        return self.x - self.z * np.eye(self.n)

    @cached_property
    def k_inv(self):
        li = self.factor.lower_inv
        return li.conj().T @ li

    @cached_property
    def li_y(self):
        """``L^{-1} Y``."""
        return trmm(1.0, self.factor.lower_inv, self.y, lower=1)

    @cached_property
    def g21(self):
        return self.li_y.conj().T @ self.factor.lower_inv

    def trace21(self, a, structure=None):
        """``Tr(G^[21] A) = <L^{-1} Y, L^{-1} A>_F`` without forming ``G^[21]``.

        Matrices with at most one non-zero per column (diagonal, permutation)
        take an ``O(N^2)`` path for ``L^{-1} A``; pass
        ``structure=monomial_structure(a)`` to skip re-detecting it.
        """
        li = self.factor.lower_inv
        if structure is None:
            structure = monomial_structure(a)
        # both factors are Fortran-ordered; work with their C-ordered transposes
        if structure is False:
            rhs_t = (li @ np.asarray(a)).T
        else:
            rows, vals = structure
            rhs_t = li.T[rows] * vals[:, None]
        return complex(np.vdot(self.li_y.T, rhs_t))

    @cached_property
    def _gram_t_factor(self):
        # (Y* Y + eta^2); only needed for the [22] block
        yy = self.y.conj().T @ self.y
        yy[np.diag_indices(self.n)] += self.eta**2
        return cholesky(yy, with_inverse=True, check_hermitian=False)

    def block(self, k, l):
        """Dense ``G_z(i eta)^[kl]``."""
        if (k, l) == (2, 1):
            return self.g21
        if (k, l) == (1, 2):
            return self.k_inv @ self.y
        if (k, l) == (1, 1):
            return 1j * self.eta * self.k_inv
        if (k, l) == (2, 2):
            li = self._gram_t_factor.lower_inv
            return 1j * self.eta * (li.conj().T @ li)
        raise ValueError(f"block must be in {{1,2}}^2, got {(k, l)}")

    def sigma_min(self, tol=SIGMA_TOL):
        """``sigma_min(X - z)`` reusing the cached factor."""
        return smallest_singular_value(self.y, tol=tol, factor=self.factor, shift=self.eta**2)

    def residual(self, probes=2, seed=0):
        """Relative factorization residual ``|(L L* - K) v| / |K v|`` on random probes."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal((self.n, probes)) + 1j * rng.standard_normal((self.n, probes))
        kv = self.y @ (self.y.conj().T @ v) + self.eta**2 * v
        low = self.factor.lower
        llv = low @ (low.conj().T @ v)
        return float(np.linalg.norm(llv - kv) / np.linalg.norm(kv))


def monomial_structure(a):
    """``(rows, vals)`` with ``A[rows[j], j] = vals[j]`` the only non-zeros, or ``False``."""
    a = np.asarray(a)
    nz = a != 0
    if np.any(np.count_nonzero(nz, axis=0) > 1):
        return False
    rows = np.argmax(nz, axis=0)
    return rows, a[rows, np.arange(a.shape[1])]


def resolvent_block_trace(ws: ResolventWorkspace, block, a):
    """``Tr(G_z(i eta)^[kl] A)``."""
    a = as_square(a, "A")
    k, l = block
    if (k, l) == (2, 1):
        return ws.trace21(a)
    return trace_product(ws.block(k, l), a)


def girko_free_error(ws: ResolventWorkspace, a, kappa=None):
    """``|Tr((X - z)^{-1} A) - Tr(G^[21] A)|`` with the first term from an LU solve.

    On the event that ``sigma_min(X - z) >= kappa`` the difference is at most
    ``kappa^-3 N eta^2 ||A||``.
    """
    a = as_square(a, "A")
    lu = sla.lu_factor(ws.y, check_finite=False)
    direct = np.trace(sla.lu_solve(lu, a, check_finite=False))
    return float(abs(direct - resolvent_block_trace(ws, (2, 1), a)))


def girko_free_bound(kappa, n, eta, a_norm=1.0):
    return kappa**-3 * n * eta**2 * a_norm


def spectral_norm(x, tol=1e-10, max_iter=2000):
    """``||X||_2`` by power iteration on ``X* X`` (Rayleigh-quotient stopping)."""
    x = np.asarray(x)
    v = np.ones(x.shape[1], dtype=complex)
    v /= np.linalg.norm(v)
    prev = 0.0
    lam = 0.0
    for _ in range(max_iter):
        w = x.conj().T @ (x @ v)
        lam = float(np.real(np.vdot(v, w)))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam - prev) <= tol * abs(lam):
            break
        prev = lam
    return math.sqrt(max(lam, 0.0))


@dataclass(frozen=True)
class OmegaVerdict:
    passed: bool
    min_sigma: float
    grid_spacing: float
    effective_margin: float
    delta: float
    kappa: float
    inner_min: float
    outer_min: float
    norm_x: float

    @property
    def certified_radius(self):
        """Beyond this radius ``sigma_min(X - z) >= |z| - ||X|| >= kappa`` holds outright."""
        return self.norm_x + self.kappa

    def to_dict(self):
        return {
            "passed": self.passed,
            "min_sigma": self.min_sigma,
            "grid_spacing": self.grid_spacing,
            "effective_margin": self.effective_margin,
            "delta": self.delta,
            "kappa": self.kappa,
            "inner_min": self.inner_min,
            "outer_min": self.outer_min,
            "norm_x": self.norm_x,
        }


def _sigma_or_zero(x, z, eta):
    try:
        return ResolventWorkspace.build(x, z, eta).sigma_min()
    except (NotPositiveDefinite, SingularMatrix):
        return 0.0


def ring(radius, nodes):
    """Equispaced nodes on ``|z| = radius``, identical to the contour nodes."""
    return make_contour(radius, nodes, min_nodes=1).points


def _is_real(x):
    return not np.iscomplexobj(x) or not np.any(x.imag)


def omega_check(x, delta, kappa, grid_nodes=64, workspaces=None):
    """Finite-grid certificate for the event ``sigma_min(X - z) >= kappa`` on ``|z| >= 1 + delta/2``.

    ``sigma_min`` is evaluated at ``grid_nodes`` equispaced points of the
    circle ``|z| = 1 + delta/2`` and at 8 points of ``|z| = 1 + delta``.  The
    check passes iff every value is at least ``kappa + s`` with ``s`` the
    chord length between neighbouring inner nodes; since ``sigma_min`` is
    1-Lipschitz in ``z`` this covers the whole inner circle.  Far away,
    ``sigma_min(X - z) >= |z| - ||X||`` and the verdict records ``||X||``.

    ``workspaces`` may supply ready factorizations at the inner-ring nodes
    (a sequence in ring order, ``None`` where absent), e.g. those built for a
    contour integral on the same circle.  For real ``X`` the singular values
    at ``z`` and ``conj(z)`` coincide, so only the upper half of each ring is
    evaluated.
    """
    if not 0 < kappa < delta / 2:
        raise ValueError("need 0 < kappa < delta/2")
    x = as_square(x, "X")
    n = x.shape[0]
    eta = default_eta(n)
    real = _is_real(x)
    r_in = 1.0 + delta / 2
    r_out = 1.0 + delta
    spacing = 2.0 * r_in * math.sin(math.pi / grid_nodes)
    if workspaces is not None and len(workspaces) != grid_nodes:
        raise ValueError("need one workspace slot per inner grid node")

    def sweep(points, supplied):
        count = len(points)
        vals = [0.0] * count
        for j, z in enumerate(points):
            if real and j > count // 2:
                vals[j] = vals[count - j]
                continue
            ws = supplied[j] if supplied is not None else None
            if ws is None:
                vals[j] = _sigma_or_zero(x, z, eta)
                continue
            if abs(ws.z - z) > 1e-12 * r_in:
                raise ValueError("workspace nodes do not match the inner grid")
            try:
                vals[j] = ws.sigma_min()
            except SingularMatrix:
                vals[j] = 0.0
        return vals

    inner = sweep(ring(r_in, grid_nodes), workspaces)
    outer = sweep(ring(r_out, OUTER_RING_NODES), None)
    min_sigma = float(min(inner + outer))
    margin = min_sigma - kappa - spacing
    return OmegaVerdict(
        passed=bool(margin >= 0.0),
        min_sigma=min_sigma,
        grid_spacing=float(spacing),
        effective_margin=float(margin),
        delta=float(delta),
        kappa=float(kappa),
        inner_min=float(min(inner)),
        outer_min=float(min(outer)),
        norm_x=spectral_norm(x),
    )


def local_law_errors(ws: ResolventWorkspace, a):
    """``<A (G_z - M_z)^[kl]>`` for the four blocks, keyed by ``(k, l)``."""
    a = as_square(a, "A")
    mm = m_matrix(solve_m_u(ws.z, ws.eta))
    tr_a = complex(np.trace(a)) / ws.n
    out = {}
    for k in (1, 2):
        for l in (1, 2):
            g = resolvent_block_trace(ws, (k, l), a) / ws.n
            out[(k, l)] = g - tr_a * mm[k - 1, l - 1]
    return out


def entrywise_error(ws: ResolventWorkspace, block, i=0, j=0):
    """``(G_z - M_z)`` at entry ``(i, j)`` of block ``block``."""
    k, l = block
    mm = m_matrix(solve_m_u(ws.z, ws.eta))
    g = ws.block(k, l)[i, j]
    return complex(g - (mm[k - 1, l - 1] if i == j else 0.0))
