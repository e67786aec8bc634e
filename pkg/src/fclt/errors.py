"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class DimensionMismatch(ValueError):
    pass


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot.

    In this package that almost always means the spectral parameter sits
    inside (or too close to) the spectrum of ``X`` for the chosen ``eta``.
    """


class SingularMatrix(np.linalg.LinAlgError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, message, residual=None, iterate=None):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


class WrongBranch(RuntimeError):
    pass


class SingularStability(np.linalg.LinAlgError):
    pass


class BadRadius(ValueError):
    pass


class NonFiniteSample(ValueError):
    pass


class OutsideDomain(ValueError):
    pass


class KernelPole(ZeroDivisionError):
    pass


class NotPSD(np.linalg.LinAlgError):
    pass


class NearSingularNode(np.linalg.LinAlgError):
    pass


class ConfigInvalid(ValueError):
    pass


class TooFewSamples(ValueError):
    pass
