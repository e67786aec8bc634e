"""Trapezoidal quadrature on positively oriented circles ``|z| = r``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRadius, NonFiniteSample

DEFAULT_DELTA = 0.5
DEFAULT_NODES = 512

__all__ = ["Contour", "integrate", "make_contour"]


@dataclass(frozen=True)
class Contour:
    radius: float
    nodes: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def spacing(self):
        """Chord length between neighbouring nodes."""
        return 2.0 * self.radius * np.sin(np.pi / self.nodes)


def make_contour(radius=1.0 + DEFAULT_DELTA / 2, nodes=DEFAULT_NODES, min_nodes=16):
    """Equispaced nodes ``z_j = r e^{2 pi i j/n}`` with weights ``2 pi i z_j / n``.

    ``min_nodes`` guards production use; pass a smaller value only for
    hand-checkable toy contours.
    """
    if not radius > 1.0:
        raise BadRadius(f"contour radius must exceed 1, got {radius}")
    nodes = int(nodes)
    if nodes < max(min_nodes, 1):
        raise ValueError(f"need at least {min_nodes} nodes, got {nodes}")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    pts = radius * np.exp(1j * theta)
    # exact values on the axes keep small toy contours hand-checkable
    pts.real[np.isclose(pts.real, 0.0, atol=1e-15 * radius)] = 0.0
    pts.imag[np.isclose(pts.imag, 0.0, atol=1e-15 * radius)] = 0.0
    w = 2j * np.pi * pts / nodes
    pts.flags.writeable = False
    w.flags.writeable = False
    return Contour(radius=float(radius), nodes=nodes, points=pts, weights=w)


def _pairwise_sum(v):
    # index-ascending pairwise reduction, fixed regardless of numpy internals
    v = list(v)
    if not v:
        return 0j
    while len(v) > 1:
        nxt = [v[i] + v[i + 1] for i in range(0, len(v) - 1, 2)]
        if len(v) % 2:
            nxt.append(v[-1])
        v = nxt
    return complex(v[0])


def integrate(c, g):
    """``sum_j w_j g(z_j)``.

    ``g`` is either the array of integrand values at ``c.points`` or a
    callable evaluated there.
    """
    vals = g(c.points) if callable(g) else g
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != (c.nodes,):
        raise ValueError(f"expected {c.nodes} samples, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("integrand is not finite at every node")
    return _pairwise_sum(c.weights * vals)
