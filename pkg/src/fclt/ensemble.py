"""i.i.d. random matrices with entries ``N^{-1/2} chi``.

Every entry law is centred with unit second absolute moment; the complex
laws additionally have ``E chi^2 = 0``.  Randomness is addressed by a
``SampleSeed`` (master seed, sample index): the stream for a given pair does
not depend on which worker draws it or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["EntryLaw", "SampleSeed", "law_moment_report", "sample_entries", "sample_iid"]


class EntryLaw(str, Enum):
    COMPLEX_GAUSSIAN = "complex-gaussian"
    REAL_GAUSSIAN = "real-gaussian"
    COMPLEX_PHASE_RADEMACHER = "complex-phase-rademacher"
    REAL_RADEMACHER = "real-rademacher"
    REAL_UNIFORM = "real-uniform"

    @property
    def is_complex(self):
        return self in (EntryLaw.COMPLEX_GAUSSIAN, EntryLaw.COMPLEX_PHASE_RADEMACHER)

    @property
    def symmetry(self):
        return "complex" if self.is_complex else "real"


@dataclass(frozen=True)
class SampleSeed:
    master: int
    index: int = 0

    def generator(self, stream=0):
        """A fresh generator for this (master, index) pair.

        ``stream`` separates independent consumers of the same sample (for
        example the matrix draw and the limit sampler).
        """
        ss = np.random.SeedSequence(entropy=int(self.master) & (2**64 - 1),
                                    spawn_key=(int(self.index), int(stream)))
        return np.random.Generator(np.random.Philox(ss))


def sample_entries(law, size, rng):
    """Draw ``size`` i.i.d. copies of ``chi`` (unit variance, not rescaled)."""
    law = EntryLaw(law)
    if law is EntryLaw.COMPLEX_GAUSSIAN:
        s = math.sqrt(0.5)
        return s * rng.standard_normal(size) + 1j * (s * rng.standard_normal(size))
    if law is EntryLaw.REAL_GAUSSIAN:
        return rng.standard_normal(size)
    if law is EntryLaw.COMPLEX_PHASE_RADEMACHER:
        return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size))
    if law is EntryLaw.REAL_RADEMACHER:
        return 2.0 * rng.integers(0, 2, size) - 1.0
    if law is EntryLaw.REAL_UNIFORM:
        r = math.sqrt(3.0)
        return rng.uniform(-r, r, size)
    raise ValueError(f"unknown law {law!r}")


def sample_iid(n, law, seed):
    """An ``n x n`` matrix with i.i.d. entries distributed as ``n^{-1/2} chi``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not isinstance(seed, SampleSeed):
        seed = SampleSeed(int(seed))
    chi = sample_entries(law, (n, n), seed.generator())
    return chi / math.sqrt(n)


def law_moment_report(law, samples, seed):
    """Empirical ``E chi, E|chi|^2, E chi^2, E|chi|^4`` with standard errors.

    Returns a dict mapping moment name to ``(estimate, standard_error)``;
    complex moments have complex estimates and the SE of the modulus of the
    fluctuation.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if not isinstance(seed, SampleSeed):
        seed = SampleSeed(int(seed))
    chi = np.asarray(sample_entries(law, samples, seed.generator()), dtype=complex)
    observables = {
        "mean": chi,
        "abs2": np.abs(chi) ** 2,
        "square": chi**2,
        "abs4": np.abs(chi) ** 4,
    }
    report = {}
    for name, vals in observables.items():
        est = vals.mean()
        se = math.sqrt(np.mean(np.abs(vals - est) ** 2) / (samples - 1))
        report[name] = (complex(est), se)
    return report
