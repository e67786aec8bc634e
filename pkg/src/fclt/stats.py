"""The functional statistic ``L_N(f, A) = Tr f(X) A`` by three routes.

* ``contour-hermitized``: ``-(1/2 pi i) oint f(z) Tr(G_z(i eta)^[21] A) dz``,
  one Cholesky factorization of the Hermitized problem per node;
* ``contour-direct``: ``(1/2 pi i) oint f(z) Tr((z - X)^{-1} A) dz`` with LU
  solves;
* ``horner-oracle``: ``Tr(f(X) A)`` by matrix Horner evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .contour import Contour, _pairwise_sum
from .ensemble import SampleSeed
from .errors import DimensionMismatch, NearSingularNode, NotPositiveDefinite
from .functions import PowerSeries, eval_series
from .hermitize import OmegaVerdict, ResolventWorkspace, _is_real, default_eta, monomial_structure
from .linalg import as_square, trace_product

DIRECT_RESIDUAL_TOL = 1e-8

METHODS = ("contour-hermitized", "contour-direct", "horner-oracle")

__all__ = [
    "METHODS",
    "StatRecord",
    "contour_block21_traces",
    "contour_workspaces",
    "trace_f_direct",
    "trace_f_hermitized",
    "trace_f_horner",
]


@dataclass(frozen=True)
class StatRecord:
    """One evaluation of ``Tr f(X) A``.

    ``valid`` is false when the Omega certificate failed or any contour node
    could not be factorized; such values are excluded from aggregation.
    """

    value: complex
    method: str
    omega: OmegaVerdict | None = None
    nodes: int = 0
    seed: SampleSeed | None = None
    node_failures: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def valid(self):
        return self.node_failures == 0 and (self.omega is None or self.omega.passed)

    def with_omega(self, omega):
        return StatRecord(self.value, self.method, omega, self.nodes, self.seed, self.node_failures)


def _mirror_index(j, n):
    return (n - j) % n


def contour_workspaces(x, c: Contour, eta=None, symmetric=None):
    """One ``ResolventWorkspace`` per contour node (``None`` where factorization failed).

    For real ``X`` (``symmetric=None`` detects it) only nodes in the closed
    upper half plane are factorized; the others stay ``None`` and are
    recovered by conjugation in ``contour_block21_traces``.
    """
    x = as_square(x, "X")
    eta = default_eta(x.shape[0]) if eta is None else eta
    symmetric = _is_real(x) if symmetric is None else symmetric
    out = []
    for j, z in enumerate(c.points):
        if symmetric and j > c.nodes // 2:
            out.append(None)
            continue
        try:
            out.append(ResolventWorkspace.build(x, z, eta))
        except NotPositiveDefinite:
            out.append(None)
    return out


def contour_block21_traces(workspaces, mats, symmetric=False):
    """``T[j, i] = Tr(G_{z_j}^[21] A_i)``; NaN rows mark failed nodes.

    With ``symmetric`` (real ``X``), ``G_{conj z}^[21] = conj(G_z^[21])``, so
    the row of a lower-half node ``n - j`` is ``conj(Tr(G_{z_j}^[21] conj(A_i)))``.
    """
    n_nodes = len(workspaces)
    mats = [np.asarray(a) for a in mats]
    out = np.full((n_nodes, len(mats)), np.nan + 0j)
    shapes = [monomial_structure(a) for a in mats]
    shapes_conj = [monomial_structure(np.conj(a)) for a in mats] if symmetric else shapes
    for j, ws in enumerate(workspaces):
        if ws is None:
            continue
        for i, a in enumerate(mats):
            if a.shape != ws.x.shape:
                raise DimensionMismatch(f"A has shape {a.shape}, X is {ws.x.shape}")
            out[j, i] = ws.trace21(a, shapes[i])
            mj = _mirror_index(j, n_nodes)
            if symmetric and mj != j and workspaces[mj] is None:
                out[mj, i] = np.conj(ws.trace21(np.conj(a), shapes_conj[i]))
    return out


def _hermitized_value(traces_col, fz, c):
    # -(1/2 pi i) sum_j w_j f(z_j) T_j
    return -_pairwise_sum(c.weights * fz * traces_col) / (2j * np.pi)


def trace_f_hermitized(x, f: PowerSeries, a, c: Contour, eta=None, omega=None, seed=None, workspaces=None):
    """``L = -(1/2 pi i) oint f(z) Tr(G_z(i eta)^[21] A) dz`` by trapezoidal quadrature.

    Parameters
    ----------
    eta : float, optional
        Defaults to ``N^-2``.
    omega : OmegaVerdict, optional
        Attached to the record; the caller runs ``omega_check`` (possibly
        reusing ``workspaces``).
    workspaces : list, optional
        Output of ``contour_workspaces`` for the same ``(X, c, eta)``.
    """
    x = as_square(x, "X")
    a = as_square(a, "A")
    symmetric = _is_real(x)
    if workspaces is None:
        workspaces = contour_workspaces(x, c, eta, symmetric)
    traces = contour_block21_traces(workspaces, [a], symmetric)[:, 0]
    failures = int(np.sum(np.isnan(traces)))
    value = np.nan if failures else _hermitized_value(traces, eval_series(f, c.points), c)
    return StatRecord(complex(value), "contour-hermitized", omega, c.nodes, seed, failures)


def trace_f_horner(x, f: PowerSeries, a, omega=None, seed=None):
    """``Tr(f(X) A)`` with ``f(X)`` from the Horner recurrence ``F <- F X + c_k I``."""
    x = as_square(x, "X")
    a = as_square(a, "A")
    if a.shape != x.shape:
        raise DimensionMismatch(f"A has shape {a.shape}, X is {x.shape}")
    coef = f.coefficients
    n = x.shape[0]
    fx = np.zeros((n, n), dtype=complex)
    fx[np.diag_indices(n)] = coef[-1]
    for ck in coef[-2::-1]:
        fx = fx @ x
        fx[np.diag_indices(n)] += ck
    return StatRecord(complex(trace_product(fx, a)), "horner-oracle", omega, 0, seed)


def direct_resolvent_traces(x, c: Contour, mats, tol=DIRECT_RESIDUAL_TOL):
    """``T[j, i] = Tr((z_j - X)^{-1} A_i)`` by LU solves, with a residual check."""
    x = as_square(x, "X")
    n = x.shape[0]
    eye = np.eye(n)
    mats = [as_square(a, "A") for a in mats]
    out = np.empty((c.nodes, len(mats)), dtype=complex)
    for j, z in enumerate(c.points):
        zx = z * eye - x
        lu = sla.lu_factor(zx, check_finite=False)
        zx_norm = np.linalg.norm(zx, 1)
        for i, a in enumerate(mats):
            s = sla.lu_solve(lu, a, check_finite=False)
            denom = zx_norm * np.linalg.norm(s, 1) + np.linalg.norm(a, 1)
            res = 0.0 if denom == 0 else np.linalg.norm(zx @ s - a, 1) / denom
            if not res <= tol:
                raise NearSingularNode(f"LU residual {res:.3e} at z = {z}")
            out[j, i] = np.trace(s)
    return out


def trace_f_direct(x, f: PowerSeries, a, c: Contour, omega=None, seed=None):
    """``(1/2 pi i) oint f(z) Tr((z - X)^{-1} A) dz`` by trapezoidal quadrature."""
    traces = direct_resolvent_traces(x, c, [a])[:, 0]
    value = _pairwise_sum(c.weights * eval_series(f, c.points) * traces) / (2j * np.pi)
    return StatRecord(complex(value), "contour-direct", omega, c.nodes, seed)
