"""Monte Carlo and deterministic tools for the central limit theorem of
``Tr f(X) A`` for i.i.d. non-Hermitian random matrices ``X``."""

from __future__ import annotations

__version__ = "0.1.0"
