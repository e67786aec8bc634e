"""Analytic test functions as truncated power series.

On the unit circle the Taylor coefficients of ``f`` are its Fourier
coefficients, which turns both inner products of the limiting covariance
into finite sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour
from .errors import OutsideDomain

DEFAULT_DEGREE = 16

__all__ = [
    "PowerSeries",
    "conj_reflect",
    "disk_grad_inner",
    "eval_series",
    "hardy_inner",
    "kernel_identity_check",
    "monomial",
    "truncated_exp",
]


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """``f(z) = sum_k c_k z^k`` declared valid on ``|z| < radius``.

    Finite series are entire, hence the default ``radius = inf``; a
    truncation of a transcendental function should declare the radius of
    the function it approximates and carry ``tail_bound``.
    """

    coefficients: np.ndarray
    radius: float = math.inf
    tail_bound: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=complex)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if not self.radius > 1.0:
            raise ValueError("radius of validity must exceed 1")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def __eq__(self, other):
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return (
            np.array_equal(self.coefficients, other.coefficients)
            and self.radius == other.radius
            and self.tail_bound == other.tail_bound
        )

    def __hash__(self):
        return hash((self.coefficients.tobytes(), self.radius, self.tail_bound))

    @property
    def degree(self):
        return self.coefficients.size - 1

    def __call__(self, z):
        return eval_series(self, z)

    def sup_norm_proxy(self, r):
        """``sum_k |c_k| r^k``, an upper bound for ``sup_{|z|<=r} |f|``."""
        k = np.arange(self.coefficients.size)
        return float(np.sum(np.abs(self.coefficients) * r**k))

    def derivative(self):
        k = np.arange(1, self.coefficients.size)
        c = self.coefficients[1:] * k if k.size else np.zeros(1)
        return PowerSeries(c, self.radius, label=f"d/dz {self.label}".strip())

    def fourier(self, k):
        """``f^(k)``; zero for negative and for beyond-degree modes."""
        if 0 <= k <= self.degree:
            return complex(self.coefficients[k])
        return 0j

    def to_pairs(self):
        return [[float(c.real), float(c.imag)] for c in self.coefficients]

    @classmethod
    def from_pairs(cls, pairs, radius=math.inf, label=""):
        """Build from the config-file form ``[[re, im], ...]``."""
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("coefficients must be a list of (re, im) pairs")
        return cls(arr[:, 0] + 1j * arr[:, 1], radius, label=label)


def monomial(k, scale=1.0):
    c = np.zeros(k + 1, dtype=complex)
    c[k] = scale
    return PowerSeries(c, label=f"z^{k}")


def truncated_exp(degree=DEFAULT_DEGREE, r=1.25):
    """Taylor truncation of ``exp``; ``tail_bound`` bounds the dropped tail on ``|z| <= r``."""
    c = np.array([1.0 / math.factorial(k) for k in range(degree + 1)], dtype=complex)
    tail = r ** (degree + 1) / math.factorial(degree + 1) * math.exp(r)
    return PowerSeries(c, math.inf, tail_bound=tail, label=f"exp[{degree}]")


def eval_series(f, z):
    """Horner evaluation; accepts scalars or arrays."""
    z = np.asarray(z)
    if np.any(np.abs(z) >= f.radius):
        raise OutsideDomain(f"|z| must be below the validity radius {f.radius}")
    acc = np.zeros_like(z, dtype=complex)
    for c in f.coefficients[::-1]:
        acc = acc * z + c
    return acc[()] if acc.ndim == 0 else acc


def conj_reflect(f):
    """``f*(z) = conj(f(conj z))``: conjugate the coefficients."""
    return PowerSeries(np.conj(f.coefficients), f.radius, f.tail_bound, label=f"{f.label}*")


def _padded(f, g):
    n = max(f.coefficients.size, g.coefficients.size)
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    a[: f.coefficients.size] = f.coefficients
    b[: g.coefficients.size] = g.coefficients
    return a, b


def hardy_inner(f, g):
    """Boundary inner product with the constant mode removed.

    ``(1/2pi) int_{|z|=1} (f - f(0)) conj(g - g(0)) |dz| = sum_{k>=1} c_k conj(d_k)``.
    """
    a, b = _padded(f, g)
    return complex(np.sum(a[1:] * np.conj(b[1:])))


def disk_grad_inner(f, g):
    """``(1/pi) int_D f' conj(g') dA = sum_{k>=1} k c_k conj(d_k)``."""
    a, b = _padded(f, g)
    k = np.arange(a.size)
    return complex(np.sum(k[1:] * a[1:] * np.conj(b[1:])))


def kernel_identity_check(f, g, c: Contour):
    """Residuals of the two double-contour identities behind the limit covariance.

    The sums discretize

        (1/4pi^2) oint oint f(z) conj(g(w)) / (z wbar (z wbar - 1)) dz conj(dw)
        -(1/4pi^2) oint oint f(z) g(w) / (z w (z w - 1)) dz dw

    with both ``z`` and ``w`` running positively around ``c``.  (Running the
    ``wbar`` variable positively instead flips the sign of the first form.)
    They should equal ``hardy_inner(f, g)`` and ``hardy_inner(f, conj_reflect(g))``.

    Returns
    -------
    (float, float)
        Absolute residuals for the covariance and pseudo-covariance identity.
    """
    if c.radius >= min(f.radius, g.radius):
        raise OutsideDomain("contour must lie inside both validity radii")
    z = c.points
    fz = eval_series(f, z)
    gw = eval_series(g, z)
    zw_bar = np.outer(z, np.conj(z))
    zw = np.outer(z, z)
    cov = np.einsum(
        "j,k,jk->", fz * c.weights, np.conj(gw * c.weights), 1.0 / (zw_bar * (zw_bar - 1.0))
    ) / (4 * np.pi**2)
    pseudo = -np.einsum("j,k,jk->", fz * c.weights, gw * c.weights, 1.0 / (zw * (zw - 1.0))) / (
        4 * np.pi**2
    )
    return (
        float(abs(cov - hardy_inner(f, g))),
        float(abs(pseudo - hardy_inner(f, conj_reflect(g)))),
    )
