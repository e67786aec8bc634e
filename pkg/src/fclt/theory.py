"""Deterministic predictions for the Gaussian limit of ``Tr f(X) A``.

Covariances split into a tracial mode, carried by ``<A>``, and a traceless
mode, carried by ``A - <A>``; the two are independent in the limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour
from .ensemble import SampleSeed
from .errors import DimensionMismatch, KernelPole, NotPSD
from .functions import PowerSeries, conj_reflect, disk_grad_inner, eval_series, hardy_inner

PSD_TOL = 1e-10
POLE_TOL = 1e-12

__all__ = [
    "CovarianceModel",
    "TestPair",
    "contour_covariance",
    "covariance_model",
    "kernel_V",
    "kernel_Vcirc",
    "limit_sampler",
    "mean_prediction",
    "resolvent_covariance",
    "resolvent_mean_prediction",
]


def _check_symmetry(symmetry):
    if symmetry not in ("complex", "real"):
        raise ValueError(f"symmetry must be 'complex' or 'real', got {symmetry!r}")
    return symmetry


@dataclass(frozen=True, eq=False)
class TestPair:
    """A test function together with its deterministic matrix."""

    __test__ = False  # not a pytest class

    f: PowerSeries
    a: np.ndarray
    label: str = ""
    trace: complex = field(init=False)
    traceless: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        n = a.shape[0]
        tr = complex(np.trace(a)) / n
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "trace", tr)
        object.__setattr__(self, "traceless", a - tr * np.eye(n))
        if n <= 1024 and np.linalg.norm(a, 2) > 1.0 + 1e-12:
            warnings.warn(f"||A|| > 1 for test pair {self.label!r}", stacklevel=2)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def traceless_gram(self):
        """``<A0 A0*>``."""
        return _ntr_adj(self.traceless, self.traceless)

    @property
    def traceless_gram_t(self):
        """``<A0 A0^T>``."""
        return _ntr_t(self.traceless, self.traceless)


def _ntr_adj(a, b):
    # <A B*> = N^{-1} sum_kl A_kl conj(B_kl)
    return complex(np.vdot(b, a)) / a.shape[0]


def _ntr_t(a, b):
    # <A B^T> = N^{-1} sum_kl A_kl B_kl
    return complex(np.sum(a * b)) / a.shape[0]


def kernel_V(z, w):
    """``V(z, w) = 1/(1 - z conj(w))^2``, the tracial resolvent kernel."""
    zw = complex(z) * complex(w).conjugate()
    if abs(zw - 1.0) < POLE_TOL:
        raise KernelPole(f"z conj(w) = {zw} is at the pole")
    return 1.0 / (1.0 - zw) ** 2


def kernel_Vcirc(z, w):
    """``V°(z, w) = 1/(z conj(w) (z conj(w) - 1))``, the traceless resolvent kernel."""
    zw = complex(z) * complex(w).conjugate()
    if abs(zw - 1.0) < POLE_TOL or abs(zw) < POLE_TOL:
        raise KernelPole(f"z conj(w) = {zw} is at a pole")
    return 1.0 / (zw * (zw - 1.0))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    symmetry: str
    pairs: tuple
    cov: np.ndarray
    pseudo: np.ndarray

    def real_embedding(self):
        """Covariance of ``(Re xi, Im xi)`` as a real ``2n x 2n`` matrix."""
        c, p = self.cov, self.pseudo
        saa = np.real(c + p) / 2
        sbb = np.real(c - p) / 2
        sab = np.imag(p - c) / 2
        sba = np.imag(p + c) / 2
        return np.block([[saa, sab], [sba, sbb]])

    def min_eigenvalues(self):
        """Smallest eigenvalue of ``cov`` and of the real embedding."""
        return (
            float(np.linalg.eigvalsh((self.cov + self.cov.conj().T) / 2).min()),
            float(np.linalg.eigvalsh(self.real_embedding()).min()),
        )

    def check_psd(self, tol=PSD_TOL):
        lam_c, lam_r = self.min_eigenvalues()
        scale = max(1.0, float(np.max(np.abs(self.cov))) if self.cov.size else 1.0)
        if lam_c < -tol * scale or lam_r < -tol * scale:
            raise NotPSD(f"covariance model is not PSD (min eigenvalues {lam_c:.3e}, {lam_r:.3e})")


def covariance_model(pairs, symmetry="complex"):
    """Limit covariance ``E xi_i conj(xi_j)`` and pseudo-covariance ``E xi_i xi_j``.

    ``cov[i, j] = <A_i> conj(<A_j>) sum_k k c_ik conj(c_jk) + <A0_i A0_j*> sum_{k>=1} c_ik conj(c_jk)``
    where ``A0 = A - <A>``.  The pseudo-covariance vanishes for complex
    entries; for real entries it is the same expression with ``f_j``
    replaced by ``f_j*`` and ``A_j*`` by ``A_j^T``.
    """
    symmetry = _check_symmetry(symmetry)
    pairs = tuple(pairs)
    if pairs and len({p.n for p in pairs}) != 1:
        raise DimensionMismatch("all test pairs must share the matrix dimension")
    n = len(pairs)
    cov = np.zeros((n, n), dtype=complex)
    pseudo = np.zeros((n, n), dtype=complex)
    for i, pi in enumerate(pairs):
        for j, pj in enumerate(pairs):
            cov[i, j] = pi.trace * np.conj(pj.trace) * disk_grad_inner(pi.f, pj.f) + _ntr_adj(
                pi.traceless, pj.traceless
            ) * hardy_inner(pi.f, pj.f)
            if symmetry == "real":
                fj = conj_reflect(pj.f)
                pseudo[i, j] = pi.trace * pj.trace * disk_grad_inner(pi.f, fj) + _ntr_t(
                    pi.traceless, pj.traceless
                ) * hardy_inner(pi.f, fj)
    model = CovarianceModel(symmetry=symmetry, pairs=pairs, cov=cov, pseudo=pseudo)
    model.check_psd()
    return model


def resolvent_covariance(z, w, a, b, symmetry="complex"):
    """Covariance and pseudo-covariance of the resolvent process ``zeta(z, A)``.

    Returns
    -------
    (complex, complex)
        ``E zeta(z,A) conj(zeta(w,B))`` and ``E zeta(z,A) zeta(w,B)``.
    """
    symmetry = _check_symmetry(symmetry)
    if not (abs(z) > 1 and abs(w) > 1):
        raise ValueError("resolvent kernels are used outside the unit disk only")
    pa = TestPair(PowerSeries([1.0]), a)
    pb = TestPair(PowerSeries([1.0]), b)
    cov = pa.trace * np.conj(pb.trace) * kernel_V(z, w) + _ntr_adj(
        pa.traceless, pb.traceless
    ) * kernel_Vcirc(z, w)
    pseudo = 0j
    if symmetry == "real":
        wc = complex(w).conjugate()
        pseudo = pa.trace * pb.trace * kernel_V(z, wc) + _ntr_t(
            pa.traceless, pb.traceless
        ) * kernel_Vcirc(z, wc)
    return complex(cov), complex(pseudo)


def mean_prediction(f, a, n, symmetry="complex"):
    """Leading-order ``E Tr f(X) A``: ``N <A> f(0)``, plus ``<A>((f(1)+f(-1))/2 - f(0))`` for real entries."""
    symmetry = _check_symmetry(symmetry)
    a = np.asarray(a)
    tr = complex(np.trace(a)) / a.shape[0]
    f0 = complex(f.coefficients[0])
    mean = n * tr * f0
    if symmetry == "real":
        mean += tr * ((eval_series(f, 1.0) + eval_series(f, -1.0)) / 2 - f0)
    return complex(mean)


def resolvent_mean_prediction(z, a, n, symmetry="complex"):
    """Leading-order ``E Tr G_z^[21] A``: ``-N <A>/z``, shifted by ``-<A>/(z(z^2-1))`` for real entries."""
    symmetry = _check_symmetry(symmetry)
    z = complex(z)
    a = np.asarray(a)
    tr = complex(np.trace(a)) / a.shape[0]
    mean = -n * tr / z
    if symmetry == "real":
        mean += -tr / (z * (z * z - 1.0))
    return complex(mean)


def contour_covariance(pairs, c: Contour, symmetry="complex"):
    """The limit covariance rebuilt from the resolvent kernels by double quadrature.

    Integrates ``f_i(z) conj(f_j(w)) E zeta(z,A_i) conj(zeta(w,A_j))`` over
    ``c x c`` with the weights of ``-(1/2 pi i) oint f(z) (.) dz``; an
    independent route to ``covariance_model``.
    """
    symmetry = _check_symmetry(symmetry)
    pairs = tuple(pairs)
    z = c.points
    zw_bar = np.outer(z, np.conj(z))
    zw = np.outer(z, z)
    v_bar, vc_bar = 1.0 / (1.0 - zw_bar) ** 2, 1.0 / (zw_bar * (zw_bar - 1.0))
    v, vc = 1.0 / (1.0 - zw) ** 2, 1.0 / (zw * (zw - 1.0))
    fw = [eval_series(p.f, z) * c.weights for p in pairs]
    n = len(pairs)
    cov = np.zeros((n, n), dtype=complex)
    pseudo = np.zeros((n, n), dtype=complex)
    for i, pi in enumerate(pairs):
        for j, pj in enumerate(pairs):
            kern = pi.trace * np.conj(pj.trace) * v_bar + _ntr_adj(pi.traceless, pj.traceless) * vc_bar
            cov[i, j] = fw[i] @ kern @ np.conj(fw[j]) / (4 * np.pi**2)
            if symmetry == "real":
                kern = pi.trace * pj.trace * v + _ntr_t(pi.traceless, pj.traceless) * vc
                pseudo[i, j] = -(fw[i] @ kern @ fw[j]) / (4 * np.pi**2)
    return cov, pseudo


def limit_sampler(model: CovarianceModel, count, seed):
    """Draw ``count`` samples of the limiting Gaussian vector ``(xi(f_i, A_i))_i``.

    Sampling goes through the real ``2n``-dimensional embedding of
    ``(cov, pseudo)``; eigenvalues down to ``-1e-10`` are clipped to zero.

    Returns
    -------
    ndarray, shape (count, n), complex
    """
    if not isinstance(seed, SampleSeed):
        seed = SampleSeed(int(seed))
    n = model.cov.shape[0]
    sigma = model.real_embedding()
    lam, vec = np.linalg.eigh((sigma + sigma.T) / 2)
    scale = max(1.0, float(np.max(np.abs(sigma))) if sigma.size else 1.0)
    if lam.size and lam.min() < -PSD_TOL * scale:
        raise NotPSD(f"embedding has eigenvalue {lam.min():.3e}")
    root = vec * np.sqrt(np.clip(lam, 0.0, None))
    rng = seed.generator(stream=1)
    g = rng.standard_normal((count, 2 * n))
    re_im = g @ root.T
    return re_im[:, :n] + 1j * re_im[:, n:]
