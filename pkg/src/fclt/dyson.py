"""Scalar reduction of the matrix Dyson equation outside the unit disk.

For the Hermitization of ``X - z`` the Dyson solution is block constant,

    M_z(i eta) = [[m, -z u], [-conj(z) u, m]] (x) I_N,

with ``m`` the solution of ``-1/m = i eta + m - |z|^2/(i eta + m)`` in the
upper half plane and ``u = m/(i eta + m)``.  This module solves for ``(m, u)``
and builds the deterministic two-resolvent approximation ``M_B(z, w)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, SingularStability, WrongBranch

DAMPING = 0.5
TOL = 1e-13
MAX_ITER = 10_000
# Empirical bound on |m| + |u| (and on the entries of M_z); flagged, not asserted.
NORM_BOUND = 10.0

__all__ = [
    "MBlock",
    "TwoResolventApprox",
    "asymptotic_m_matrix",
    "beta_product_expansion",
    "eta_scaling_ratio",
    "m_matrix",
    "solve_m_u",
    "stability_betas",
    "two_resolvent_approx",
]


def _fixed_point_map(m, z2, eta):
    ieta = 1j * eta
    return -1.0 / (ieta + m - z2 / (ieta + m))


@dataclass(frozen=True)
class MBlock:
    z: complex
    eta: float
    m: complex
    u: complex
    iterations: int = 0

    @property
    def residual(self):
        """Relative fixed-point residual ``|m - F(m)| / |m|``."""
        return abs(self.m - _fixed_point_map(self.m, abs(self.z) ** 2, self.eta)) / abs(self.m)

    @property
    def relative_residual(self):
        """``|1 + m D(m)|`` with ``D(m) = i eta + m - |z|^2/(i eta + m)``.

        Scale free; the raw form ``|1/m + D(m)|`` multiplies this by ``1/|m|``,
        which is of order ``1/eta`` outside the disk.
        """
        ieta = 1j * self.eta
        d = ieta + self.m - abs(self.z) ** 2 / (ieta + self.m)
        return abs(1.0 + self.m * d)

    @property
    def raw_residual(self):
        ieta = 1j * self.eta
        return abs(1.0 / self.m + ieta + self.m - abs(self.z) ** 2 / (ieta + self.m))

    @property
    def within_norm_bound(self):
        return abs(self.m) + abs(self.u) <= NORM_BOUND


def solve_m_u(z, eta, tol=TOL, max_iter=MAX_ITER):
    """Solve for ``(m_z(i eta), u_z(i eta))`` by damped fixed-point iteration.

    The iteration ``m <- (m + F(m))/2`` with ``F(m) = -1/(i eta + m - |z|^2/(i eta + m))``
    starts from ``m = i`` and stops when the update is below ``tol`` relative
    to ``|m|`` (``m`` is of order ``eta`` for ``|z| > 1``, so an absolute
    tolerance would be meaningless).

    Raises
    ------
    NoConvergence
        After ``max_iter`` iterations.
    WrongBranch
        If the limit is not in the upper half plane.
    """
    z = complex(z)
    if not abs(z) > 1.0:
        raise ValueError(f"|z| must exceed 1, got {abs(z)}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    z2 = abs(z) ** 2
    m = 1j
    for it in range(1, max_iter + 1):
        new = (1.0 - DAMPING) * m + DAMPING * _fixed_point_map(m, z2, eta)
        step = abs(new - m)
        m = new
        if step <= tol * abs(m):
            break
    else:
        raise NoConvergence(
            f"Dyson iteration did not converge for z={z}, eta={eta}",
            residual=abs(m - _fixed_point_map(m, z2, eta)),
            iterate=m,
        )
    # a couple of undamped polishing steps; the map is contractive here
    for _ in range(3):
        m = _fixed_point_map(m, z2, eta)
    if not m.imag > 0:
        raise WrongBranch(f"Im m = {m.imag} <= 0 at z={z}, eta={eta}")
    u = m / (1j * eta + m)
    return MBlock(z=z, eta=float(eta), m=complex(m), u=complex(u), iterations=it)


def m_matrix(b: MBlock):
    """The 2x2 representative ``[[m, -z u], [-conj(z) u, m]]``."""
    return np.array([[b.m, -b.z * b.u], [-b.z.conjugate() * b.u, b.m]], dtype=complex)


def asymptotic_m_matrix(z, eta):
    """Small-``eta`` form ``[[i eta/(|z|^2-1), -1/conj(z)], [-1/z, i eta/(|z|^2-1)]]``."""
    z = complex(z)
    d = 1j * eta / (abs(z) ** 2 - 1.0)
    return np.array([[d, -1.0 / z.conjugate()], [-1.0 / z, d]], dtype=complex)


def stability_betas(z, w, eta, bz=None, bw=None):
    """The two non-trivial eigenvalues of ``1 - M_z S[.] M_w``.

    ``1 - u_z u_w Re(z conj w) +- sqrt(m_z^2 m_w^2 - u_z^2 u_w^2 Im(z conj w)^2)``
    with the principal square root.
    """
    bz = bz or solve_m_u(z, eta)
    bw = bw or solve_m_u(w, eta)
    zw = complex(z) * complex(w).conjugate()
    uu = bz.u * bw.u
    base = 1.0 - uu * zw.real
    root = cmath.sqrt((bz.m * bw.m) ** 2 - uu**2 * zw.imag**2)
    return base + root, base - root


@dataclass(frozen=True)
class TwoResolventApprox:
    """``M_B(z, w)`` for ``B = A^{(k,l)}`` (``A`` placed in block ``(k, l)``).

    Block ``(i, j)`` of ``M_B`` equals ``a_coef[i, j] * A + b_coef[i, j] * I``;
    ``block_traces`` holds ``(<M_B^[11]>, <M_B^[22]>)``.
    """

    block: tuple[int, int]
    trace_a: complex
    z: complex
    w: complex
    eta: float
    block_traces: tuple[complex, complex]
    a_coef: np.ndarray
    b_coef: np.ndarray
    mz: np.ndarray
    mw: np.ndarray

    def block_matrix(self, i, j, a):
        """Dense block ``(i, j)`` (1-based) for a concrete ``A``."""
        a = np.asarray(a)
        return self.a_coef[i - 1, j - 1] * a + self.b_coef[i - 1, j - 1] * np.eye(a.shape[0])

    def relation_residual(self):
        """Block-trace residual of ``M_B = M_z (B + S[M_B]) M_w``."""
        x1, x2 = self.block_traces
        assembled = [self.a_coef[i, i] * self.trace_a + self.b_coef[i, i] for i in range(2)]
        # right-hand side rebuilt from scratch
        k, l = self.block
        s = (x2, x1)  # S[M_B] = diag(<M_B^[22]>, <M_B^[11]>)
        rhs = []
        for i in range(2):
            val = self.mz[i, k - 1] * self.mw[l - 1, i] * self.trace_a
            val += sum(self.mz[i, p] * s[p] * self.mw[p, i] for p in range(2))
            rhs.append(val)
        return max(
            max(abs(assembled[i] - self.block_traces[i]) for i in range(2)),
            max(abs(rhs[i] - self.block_traces[i]) for i in range(2)),
        )


def two_resolvent_approx(block, trace_a, z, w, eta, bz=None, bw=None):
    """Deterministic approximation of ``G_z A^{(k,l)} G_w``.

    Solves the 2x2 linear system for the diagonal block traces directly and
    assembles the full block coefficients from ``M_B = M_z (B + S[M_B]) M_w``.
    """
    k, l = (int(block[0]), int(block[1]))
    if k not in (1, 2) or l not in (1, 2):
        raise ValueError(f"block must be in {{1,2}}^2, got {block}")
    bz = bz or solve_m_u(z, eta)
    bw = bw or solve_m_u(w, eta)
    mz, mw = m_matrix(bz), m_matrix(bw)
    trace_a = complex(trace_a)

    # <(M_z B M_w)^[ii]> = (M_z)_{ik} (M_w)_{li} <A>
    r = np.array([mz[i, k - 1] * mw[l - 1, i] * trace_a for i in range(2)])
    system = np.array(
        [
            [1.0 - mz[0, 1] * mw[1, 0], -mz[0, 0] * mw[0, 0]],
            [-mz[1, 1] * mw[1, 1], 1.0 - mz[1, 0] * mw[0, 1]],
        ]
    )
    det = system[0, 0] * system[1, 1] - system[0, 1] * system[1, 0]
    if abs(det) < 1e-10:
        raise SingularStability(f"stability determinant {abs(det):.3e} too small")
    x1, x2 = np.linalg.solve(system, r)

    s = (x2, x1)
    a_coef = np.empty((2, 2), dtype=complex)
    b_coef = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            a_coef[i, j] = mz[i, k - 1] * mw[l - 1, j]
            b_coef[i, j] = sum(mz[i, p] * s[p] * mw[p, j] for p in range(2))
    return TwoResolventApprox(
        block=(k, l),
        trace_a=trace_a,
        z=complex(z),
        w=complex(w),
        eta=float(eta),
        block_traces=(complex(x1), complex(x2)),
        a_coef=a_coef,
        b_coef=b_coef,
        mz=mz,
        mw=mw,
    )


def beta_product_expansion(bz, bw):
    """``|u_z u_w z conj(w) - 1|^2 - m_z^2 m_w^2``, the expanded product of the betas."""
    zw = bz.z * bw.z.conjugate()
    return abs(bz.u * bw.u * zw - 1.0) ** 2 - (bz.m * bw.m) ** 2


def eta_scaling_ratio(z, eta):
    """Ratio of deviations from the asymptotic form at ``2 eta`` and ``eta``.

    A value near 4 confirms the ``O(eta^2)`` correction.
    """
    d1 = np.max(np.abs(m_matrix(solve_m_u(z, eta)) - asymptotic_m_matrix(z, eta)))
    d2 = np.max(np.abs(m_matrix(solve_m_u(z, 2 * eta)) - asymptotic_m_matrix(z, 2 * eta)))
    return float(d2 / d1) if d1 > 0 else math.nan
