"""Monte Carlo experiments: sample, gate on the Omega event, aggregate, compare.

Every sample is appended to a JSON-lines checkpoint as soon as it is
computed, so an interrupted run resumes where it stopped and reports can be
re-aggregated from the file alone.  Discarded samples are kept in the
checkpoint together with their smallest singular value.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contour import _pairwise_sum, make_contour
from .ensemble import EntryLaw, SampleSeed, sample_iid
from .errors import ConfigInvalid, TooFewSamples
from .functions import PowerSeries, eval_series
from .hermitize import ResolventWorkspace, _is_real, local_law_errors, omega_check
from .stats import contour_block21_traces, contour_workspaces
from .theory import (
    TestPair,
    covariance_model,
    limit_sampler,
    mean_prediction,
    resolvent_covariance,
    resolvent_mean_prediction,
)

OUTPUT_DIR_ENV = "FCLT_OUTPUT_DIR"
Z_BAND = 4.0
MIN_DIAGNOSTIC_SAMPLES = 200

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "MatrixSpec",
    "PairSpec",
    "collect_samples",
    "convergence_trend",
    "energy_distance_test",
    "excess_kurtosis",
    "gaussianity_diagnostics",
    "jackknife_covariance",
    "load_config",
    "local_law_scan",
    "loglog_slope",
    "read_records",
    "resolvent_clt_experiment",
    "run_experiment",
    "trend_non_increasing",
    "write_local_law_csv",
    "write_report",
]


# --------------------------------------------------------------------------
# configuration


MATRIX_KINDS = ("identity", "traceless-alternating-diagonal", "cyclic-shift", "custom-file")


@dataclass(frozen=True)
class MatrixSpec:
    """A deterministic ``N x N`` matrix family, normalized to ``||A|| <= 1``."""

    kind: str = "identity"
    path: str | None = None

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ConfigInvalid(f"unknown matrix kind {self.kind!r}")
        if self.kind == "custom-file" and not self.path:
            raise ConfigInvalid("custom-file matrices need a path")

    def build(self, n):
        if self.kind == "identity":
            return np.eye(n, dtype=complex)
        if self.kind == "traceless-alternating-diagonal":
            if n % 2:
                raise ConfigInvalid("the alternating diagonal is traceless only for even N")
            return np.diag((-1.0) ** np.arange(n)).astype(complex)
        if self.kind == "cyclic-shift":
            if n < 2:
                raise ConfigInvalid("the cyclic shift needs N >= 2")
            return np.roll(np.eye(n, dtype=complex), 1, axis=1)
        a = np.asarray(np.load(self.path), dtype=complex)
        if a.shape != (n, n):
            raise ConfigInvalid(f"{self.path} holds a {a.shape} matrix, need {(n, n)}")
        norm = np.linalg.norm(a, 2)
        return a / norm if norm > 1.0 else a

    def to_dict(self):
        return {"kind": self.kind, "path": self.path}


@dataclass(frozen=True)
class PairSpec:
    """A test function (power series coefficients) and its matrix."""

    coefficients: tuple
    matrix: MatrixSpec = MatrixSpec()
    label: str = ""

    def series(self):
        return PowerSeries.from_pairs(self.coefficients, label=self.label)

    def build(self, n):
        return TestPair(self.series(), self.matrix.build(n), self.label)

    def to_dict(self):
        return {
            "label": self.label,
            "coefficients": [list(map(float, c)) for c in self.coefficients],
            "matrix": self.matrix.to_dict(),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a Monte Carlo run depends on.

    ``eta_exponent`` fixes ``eta = N^-eta_exponent``.  ``z_points`` lists the
    spectral parameters of the resolvent observables ``Tr G_z^[21] A_i``
    (one per pair matrix); leave it empty for purely functional runs.  With
    ``functional = False`` the contour statistics are skipped and the pairs
    only supply their matrices to the resolvent observables.
    """

    name: str
    dims: tuple
    samples: int
    law: EntryLaw
    pairs: tuple
    master_seed: int = 0
    delta: float = 1.0
    kappa: float = 0.1
    eta_exponent: float = 2.0
    contour_nodes: int = 64
    z_points: tuple = ()
    omega_gate: bool = True
    functional: bool = True
    permutations: int = 200
    output_dir: str = "runs"

    def __post_init__(self):
        object.__setattr__(self, "law", EntryLaw(self.law))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "z_points", tuple(complex(z) for z in self.z_points))
        self.validate()

    @property
    def symmetry(self):
        return self.law.symmetry

    @property
    def radius(self):
        return 1.0 + self.delta / 2

    def eta(self, n):
        return float(n) ** -self.eta_exponent

    def validate(self):
        if not self.dims or min(self.dims) < 2:
            raise ConfigInvalid("dims must list matrix sizes >= 2")
        if self.samples < 1:
            raise ConfigInvalid("samples must be positive")
        if not 0 < self.kappa < self.delta / 2:
            raise ConfigInvalid(f"need 0 < kappa < delta/2, got kappa={self.kappa}, delta={self.delta}")
        # log(eta)/log(N) = -eta_exponent must stay below -1/2
        if not self.eta_exponent > 0.5:
            raise ConfigInvalid("eta = N^-p needs p > 1/2")
        if self.contour_nodes < 16:
            raise ConfigInvalid("contour_nodes must be at least 16")
        if not self.pairs and not self.z_points:
            raise ConfigInvalid("nothing to observe: give pairs or z_points")
        if not self.functional and not self.z_points:
            raise ConfigInvalid("functional = false needs z_points")
        if self.z_points and not self.pairs:
            raise ConfigInvalid("resolvent observables use the pair matrices; give at least one pair")
        for z in self.z_points:
            if abs(z) < self.radius - 1e-12:
                raise ConfigInvalid(f"|z| = {abs(z)} is inside 1 + delta/2")

    def to_dict(self):
        return {
            "name": self.name,
            "dims": list(self.dims),
            "samples": self.samples,
            "law": self.law.value,
            "pairs": [p.to_dict() for p in self.pairs],
            "master_seed": self.master_seed,
            "delta": self.delta,
            "kappa": self.kappa,
            "eta_exponent": self.eta_exponent,
            "contour_nodes": self.contour_nodes,
            "z_points": [[z.real, z.imag] for z in self.z_points],
            "omega_gate": self.omega_gate,
            "functional": self.functional,
            "permutations": self.permutations,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        pairs = []
        for p in d.pop("pairs", []):
            m = p.get("matrix", {})
            pairs.append(
                PairSpec(
                    coefficients=tuple(tuple(c) for c in p["coefficients"]),
                    matrix=MatrixSpec(m.get("kind", "identity"), m.get("path")),
                    label=p.get("label", ""),
                )
            )
        z = [complex(*zz) if isinstance(zz, (list, tuple)) else complex(zz) for zz in d.pop("z_points", [])]
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(pairs=tuple(pairs), z_points=tuple(z), **d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid(str(exc)) from exc

    def config_hash(self):
        """Hash of everything that affects the numbers (not where they are written)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def checkpoint_path(self):
        return self.resolved_output_dir() / f"{self.name}-{self.config_hash()[:12]}.jsonl"


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def sample_seed(cfg, n, index):
    """Seed of sample ``index`` at size ``n``; distinct sizes get disjoint streams."""
    return SampleSeed(cfg.master_seed, (int(n) << 32) | int(index))


# --------------------------------------------------------------------------
# sampling


def _pack(values):
    return [[float(v.real), float(v.imag)] for v in np.asarray(values, dtype=complex).ravel()]


def _unpack(pairs):
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def compute_sample(cfg, n, index, pairs, mats):
    """All observables of one sample, as a checkpoint record."""
    t0 = time.perf_counter()
    x = sample_iid(n, cfg.law, sample_seed(cfg, n, index))
    eta = cfg.eta(n)
    c = make_contour(cfg.radius, cfg.contour_nodes)
    symmetric = _is_real(x)
    record = {"n": n, "index": index}

    failures = 0
    ws = None
    if pairs and cfg.functional:
        ws = contour_workspaces(x, c, eta, symmetric)
        traces = contour_block21_traces(ws, mats, symmetric)
        failures = int(np.sum(np.isnan(traces[:, 0])))
        vals = []
        for i, p in enumerate(pairs):
            fz = eval_series(p.f, c.points)
            vals.append(-_pairwise_sum(c.weights * fz * traces[:, i]) / (2j * np.pi))
        record["functional"] = _pack(vals)
    if cfg.z_points:
        res = []
        for z in cfg.z_points:
            wz = ResolventWorkspace.build(x, z, eta)
            res.extend(wz.trace21(a) for a in mats)
        record["resolvent"] = _pack(res)

    if cfg.omega_gate:
        # sigma_min removes the eta^2 shift, so factorizations at any eta serve
        verdict = omega_check(x, cfg.delta, cfg.kappa, cfg.contour_nodes, workspaces=ws)
        record["omega"] = verdict.to_dict()
        passed = verdict.passed
    else:
        record["omega"] = None
        passed = True
    record["node_failures"] = failures
    record["valid"] = bool(passed and failures == 0)
    record["seconds"] = time.perf_counter() - t0
    return record


def _read_checkpoint(path, cfg_hash):
    records = {}
    if not path.exists():
        return records
    with open(path) as fh:
        lines = fh.read().splitlines()
    for k, line in enumerate(lines):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            if k == len(lines) - 1:
                break  # torn final line from an interrupted write
            raise
        if "config_hash" in rec:
            if rec["config_hash"] != cfg_hash:
                raise ConfigInvalid(f"{path} belongs to a different configuration")
            continue
        records[(rec["n"], rec["index"])] = rec
    return records


def read_records(cfg: ExperimentConfig):
    """The samples already in the checkpoint of ``cfg`` (computes nothing)."""
    return _read_checkpoint(cfg.checkpoint_path(), cfg.config_hash())


def _drop_torn_tail(path):
    # an interrupted append leaves a final line without its newline
    if not path.exists() or path.stat().st_size == 0:
        return
    with open(path, "rb+") as fh:
        data = fh.read()
        if not data.endswith(b"\n"):
            fh.truncate(data.rfind(b"\n") + 1)


def collect_samples(cfg: ExperimentConfig, progress=None):
    """Compute (or resume) every sample of ``cfg``; returns records keyed by ``(n, index)``."""
    path = cfg.checkpoint_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg_hash = cfg.config_hash()
    records = _read_checkpoint(path, cfg_hash)
    _drop_torn_tail(path)
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a") as fh:
        if new_file:
            fh.write(json.dumps({"config_hash": cfg_hash, "config": cfg.to_dict()}) + "\n")
            fh.flush()
        for n in cfg.dims:
            pairs = [p.build(n) for p in cfg.pairs]
            mats = [p.a for p in pairs]
            for index in range(cfg.samples):
                if (n, index) in records:
                    continue
                rec = compute_sample(cfg, n, index, pairs, mats)
                fh.write(json.dumps(rec) + "\n")
                fh.flush()
                records[(n, index)] = rec
                if progress is not None:
                    progress(rec)
    return records


# --------------------------------------------------------------------------
# statistics


def jackknife_covariance(x, y=None, conjugate=True):
    """Centered empirical (pseudo-)covariance matrix with delete-one jackknife SEs.

    ``x`` has shape ``(M, p)``; ``y`` defaults to ``x``.  Entry ``(i, j)`` is
    ``(1/(M-1)) sum_s (x_si - mean_i) conj(y_sj - mean_j)`` (no conjugation
    when ``conjugate`` is false).

    Returns
    -------
    (estimate, se) : complex ``(p, q)`` array and real ``(p, q)`` array
    """
    x = np.asarray(x, dtype=complex)
    y = x if y is None else np.asarray(y, dtype=complex)
    m = x.shape[0]
    if m < 3:
        raise TooFewSamples("jackknife needs at least 3 samples")
    yc = np.conj(y) if conjugate else y
    sx, sy = x.sum(0), yc.sum(0)
    sxy = x.T @ yc
    est = (sxy - np.outer(sx, sy) / m) / (m - 1)
    # leave-one-out estimates, vectorized over the left-out sample
    lx = sx[None, :] - x
    ly = sy[None, :] - yc
    loo = (sxy[None] - x[:, :, None] * yc[:, None, :] - lx[:, :, None] * ly[:, None, :] / (m - 1)) / (m - 2)
    dev = loo - loo.mean(0)
    se = np.sqrt((m - 1) / m * np.sum(np.abs(dev) ** 2, axis=0))
    return est, se


def excess_kurtosis(v):
    """Sample excess kurtosis and its standard error under normality."""
    v = np.asarray(v, dtype=float)
    m = v.size
    if m < 4:
        raise TooFewSamples("kurtosis needs at least 4 samples")
    d = v - v.mean()
    m2 = np.mean(d**2)
    g2 = np.mean(d**4) / m2**2 - 3.0 if m2 > 0 else 0.0
    se = math.sqrt(24.0 * m * (m - 1) ** 2 / ((m - 3) * (m - 2) * (m + 3) * (m + 5)))
    return float(g2), se


def _real_view(v):
    v = np.asarray(v, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return np.concatenate([v.real, v.imag], axis=1)


def energy_distance_test(a, b, permutations=200, seed=0):
    """Two-sample energy distance with a permutation p-value.

    Complex vectors are compared as real vectors ``(Re, Im)``.  The pooled
    distance matrix is built once; each permutation only relabels it.
    """
    pa, pb = _real_view(a), _real_view(b)
    pooled = np.concatenate([pa, pb])
    na, nb = len(pa), len(pb)
    sq = np.sum(pooled**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pooled @ pooled.T
    dist = np.sqrt(np.clip(d2, 0.0, None))
    np.fill_diagonal(dist, 0.0)

    def stat(mask):
        ia = mask.astype(float)
        ib = 1.0 - ia
        da = dist @ ia
        cross = ib @ da
        within_a = ia @ da
        within_b = ib @ (dist @ ib)
        return 2.0 * cross / (na * nb) - within_a / na**2 - within_b / nb**2

    labels = np.zeros(na + nb, dtype=bool)
    labels[:na] = True
    observed = stat(labels)
    rng = SampleSeed(seed, 0).generator(stream=2)
    exceed = sum(stat(rng.permutation(labels)) >= observed for _ in range(permutations))
    return float(observed), (1 + exceed) / (1 + permutations)


def gaussianity_diagnostics(values, model=None, center=None, permutations=200, seed=0):
    """Excess kurtosis of every real and imaginary projection, and an energy test.

    Parameters
    ----------
    values : (M, p) complex array
    model : CovarianceModel, optional
        When given, the values (minus ``center``) are compared with ``M``
        draws from ``limit_sampler(model)`` by the energy-distance test.
    """
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    m = values.shape[0]
    if m < MIN_DIAGNOSTIC_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_DIAGNOSTIC_SAMPLES} samples, got {m}")
    rows = []
    for i in range(values.shape[1]):
        for part, proj in (("re", values[:, i].real), ("im", values[:, i].imag)):
            g2, se = excess_kurtosis(proj)
            degenerate = np.std(proj) <= 1e-12 * max(1.0, np.abs(proj).max())
            rows.append(
                {
                    "component": i,
                    "part": part,
                    "excess_kurtosis": g2,
                    "se": se,
                    "z": 0.0 if degenerate else g2 / se,
                    "flagged": bool(not degenerate and abs(g2) > Z_BAND * se),
                    "degenerate": bool(degenerate),
                }
            )
    out = {"kurtosis": rows}
    if model is not None:
        centered = values - (0.0 if center is None else np.asarray(center))
        ref = limit_sampler(model, m, SampleSeed(seed, 1))
        e, p = energy_distance_test(centered, ref, permutations, seed)
        out["energy_distance"] = e
        out["energy_p_value"] = p
        out["permutations"] = permutations
    return out


# --------------------------------------------------------------------------
# reports


@dataclass
class SizeReport:
    """Aggregates at one matrix size."""

    n: int
    kept: int
    discarded: int
    discards: list
    labels: list
    mean: np.ndarray
    mean_se: np.ndarray
    mean_theory: np.ndarray
    cov: np.ndarray
    cov_se: np.ndarray
    cov_theory: np.ndarray
    pseudo: np.ndarray
    pseudo_se: np.ndarray
    pseudo_theory: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @staticmethod
    def _z(emp, theory, se):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(emp - theory) / se
        # exactly reproduced degenerate entries (e.g. zero variance) have z = 0
        return np.where(np.abs(emp - theory) <= 1e-12, 0.0, z)

    @property
    def z_mean(self):
        return self._z(self.mean, self.mean_theory, self.mean_se)

    @property
    def z_cov(self):
        return self._z(self.cov, self.cov_theory, self.cov_se)

    @property
    def z_pseudo(self):
        return self._z(self.pseudo, self.pseudo_theory, self.pseudo_se)

    def within_band(self, band=Z_BAND):
        return bool(
            np.all(self.z_mean <= band) and np.all(self.z_cov <= band) and np.all(self.z_pseudo <= band)
        )

    @property
    def cov_error(self):
        return float(np.sum(np.abs(self.cov - self.cov_theory)))

    def to_dict(self):
        def c(a):
            a = np.asarray(a)
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}

        return {
            "n": self.n,
            "kept": self.kept,
            "discarded": self.discarded,
            "discards": self.discards,
            "labels": self.labels,
            "mean": c(self.mean),
            "mean_se": np.asarray(self.mean_se).tolist(),
            "mean_theory": c(self.mean_theory),
            "z_mean": self.z_mean.tolist(),
            "cov": c(self.cov),
            "cov_se": self.cov_se.tolist(),
            "cov_theory": c(self.cov_theory),
            "z_cov": self.z_cov.tolist(),
            "pseudo": c(self.pseudo),
            "pseudo_se": self.pseudo_se.tolist(),
            "pseudo_theory": c(self.pseudo_theory),
            "z_pseudo": self.z_pseudo.tolist(),
            "cov_error": self.cov_error,
            "diagnostics": self.diagnostics,
        }


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    config_hash: str
    master_seed: int
    sizes: list
    runtime_seconds: float

    def size(self, n):
        for s in self.sizes:
            if s.n == n:
                return s
        raise KeyError(n)

    def to_dict(self, include_runtime=True):
        d = {
            "kind": self.kind,
            "config": self.config,
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "sizes": [s.to_dict() for s in self.sizes],
        }
        if include_runtime:
            d["runtime_seconds"] = self.runtime_seconds
        return d


def _aggregate(n, recs, observable, labels, mean_theory, cov_theory, pseudo_theory, model, cfg):
    kept = [r for r in recs if r["valid"]]
    discards = [
        {"index": r["index"], "min_sigma": (r["omega"] or {}).get("min_sigma"), "node_failures": r["node_failures"]}
        for r in recs
        if not r["valid"]
    ]
    p = len(labels)
    if len(kept) < 3:
        raise TooFewSamples(f"only {len(kept)} valid samples at N={n}")
    vals = np.array([_unpack(r[observable]) for r in kept])
    mean = vals.mean(0)
    mean_se = vals.std(0, ddof=1) / math.sqrt(len(kept))
    cov, cov_se = jackknife_covariance(vals)
    pseudo, pseudo_se = jackknife_covariance(vals, conjugate=False)
    diag = {}
    if len(kept) >= MIN_DIAGNOSTIC_SAMPLES:
        diag = gaussianity_diagnostics(
            vals, model, center=mean_theory, permutations=cfg.permutations, seed=cfg.master_seed
        )
    return SizeReport(
        n=n,
        kept=len(kept),
        discarded=len(recs) - len(kept),
        discards=discards,
        labels=labels,
        mean=mean,
        mean_se=mean_se,
        mean_theory=np.asarray(mean_theory, dtype=complex).reshape(p),
        cov=cov,
        cov_se=cov_se,
        cov_theory=cov_theory,
        pseudo=pseudo,
        pseudo_se=pseudo_se,
        pseudo_theory=pseudo_theory,
        diagnostics=diag,
    )


def _by_size(records, n):
    return [records[k] for k in sorted(records) if k[0] == n]


def run_experiment(cfg: ExperimentConfig, progress=None, records=None):
    """Functional CLT experiment: ``Tr f_i(X) A_i`` against the limit covariance model."""
    if not cfg.pairs or not cfg.functional:
        raise ConfigInvalid("run_experiment needs at least one pair and functional = true")
    t0 = time.perf_counter()
    records = collect_samples(cfg, progress) if records is None else records
    sizes = []
    for n in cfg.dims:
        pairs = [p.build(n) for p in cfg.pairs]
        model = covariance_model(pairs, cfg.symmetry)
        mean_t = [mean_prediction(p.f, p.a, n, cfg.symmetry) for p in pairs]
        sizes.append(
            _aggregate(
                n,
                _by_size(records, n),
                "functional",
                [p.label for p in cfg.pairs],
                mean_t,
                model.cov,
                model.pseudo,
                model,
                cfg,
            )
        )
    return ExperimentReport(
        "functional", cfg.to_dict(), cfg.config_hash(), cfg.master_seed, sizes, time.perf_counter() - t0
    )


def resolvent_clt_experiment(cfg: ExperimentConfig, z_list=None, progress=None, records=None):
    """Resolvent CLT experiment: ``Tr G_z^[21] A`` for every ``z`` and pair matrix."""
    if z_list is not None:
        cfg = dataclasses.replace(cfg, z_points=tuple(complex(z) for z in z_list))
    if not cfg.z_points:
        raise ConfigInvalid("resolvent_clt_experiment needs z points")
    t0 = time.perf_counter()
    records = collect_samples(cfg, progress) if records is None else records
    sizes = []
    for n in cfg.dims:
        mats = [p.matrix.build(n) for p in cfg.pairs]
        obs = [(z, i) for z in cfg.z_points for i in range(len(mats))]
        labels = [f"z={z.real:g}{z.imag:+g}i|{cfg.pairs[i].label}" for z, i in obs]
        k = len(obs)
        cov_t = np.zeros((k, k), dtype=complex)
        pseudo_t = np.zeros((k, k), dtype=complex)
        for a, (z, i) in enumerate(obs):
            for b, (w, j) in enumerate(obs):
                cov_t[a, b], pseudo_t[a, b] = resolvent_covariance(z, w, mats[i], mats[j], cfg.symmetry)
        mean_t = [resolvent_mean_prediction(z, mats[i], n, cfg.symmetry) for z, i in obs]
        sizes.append(
            _aggregate(n, _by_size(records, n), "resolvent", labels, mean_t, cov_t, pseudo_t, None, cfg)
        )
    return ExperimentReport(
        "resolvent", cfg.to_dict(), cfg.config_hash(), cfg.master_seed, sizes, time.perf_counter() - t0
    )


def convergence_trend(cfg: ExperimentConfig, repetitions=5, kind="resolvent", progress=None):
    """Median over ``repetitions`` independent runs of ``sum |C~ - C|`` at each ``N``.

    Repetition ``r`` uses master seed ``cfg.master_seed + r`` (and its own
    checkpoint).  Returns ``dims``, per-run ``errors``, ``medians`` and the
    median absolute deviations ``mads``; see ``trend_non_increasing``.
    """
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    errors = {n: [] for n in cfg.dims}
    for r in range(repetitions):
        rc = dataclasses.replace(cfg, master_seed=cfg.master_seed + r, name=f"{cfg.name}-rep{r}")
        rep = resolvent_clt_experiment(rc, progress=progress) if kind == "resolvent" else run_experiment(rc, progress)
        for s in rep.sizes:
            errors[s.n].append(s.cov_error)
    med = [float(np.median(errors[n])) for n in cfg.dims]
    mad = [float(np.median(np.abs(np.asarray(errors[n]) - m))) for n, m in zip(cfg.dims, med)]
    return {"dims": list(cfg.dims), "errors": errors, "medians": med, "mads": mad}


def trend_non_increasing(medians, tolerance=0.0):
    """True iff ``medians[k+1] <= medians[k] + tolerance`` for every step."""
    return all(b <= a + tolerance for a, b in zip(medians, medians[1:]))


MOMENT_COLUMNS = ["n", "quantity", "i", "j", "label_i", "label_j", "empirical_re", "empirical_im",
                  "se", "theory_re", "theory_im", "z_score"]
ERROR_COLUMNS = ["n", "kept", "discarded", "cov_abs_error_sum", "pseudo_abs_error_sum", "max_z"]


def write_report(report: ExperimentReport, out_dir, stem=None):
    """Write ``<stem>.json``, ``<stem>-moments.csv`` and ``<stem>-error-vs-n.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{report.config.get('name', 'experiment')}-{report.kind}"
    with open(out_dir / f"{stem}.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(out_dir / f"{stem}-moments.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MOMENT_COLUMNS)
        for s in report.sizes:
            for i, lab in enumerate(s.labels):
                w.writerow([s.n, "mean", i, "", lab, "", s.mean[i].real, s.mean[i].imag, s.mean_se[i],
                            s.mean_theory[i].real, s.mean_theory[i].imag, s.z_mean[i]])
            for q, emp, se, th, z in (
                ("cov", s.cov, s.cov_se, s.cov_theory, s.z_cov),
                ("pseudo", s.pseudo, s.pseudo_se, s.pseudo_theory, s.z_pseudo),
            ):
                for i in range(len(s.labels)):
                    for j in range(len(s.labels)):
                        w.writerow([s.n, q, i, j, s.labels[i], s.labels[j], emp[i, j].real, emp[i, j].imag,
                                    se[i, j], th[i, j].real, th[i, j].imag, z[i, j]])
    with open(out_dir / f"{stem}-error-vs-n.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ERROR_COLUMNS)
        for s in report.sizes:
            max_z = max(float(np.max(s.z_mean)), float(np.max(s.z_cov)), float(np.max(s.z_pseudo)))
            w.writerow([s.n, s.kept, s.discarded, s.cov_error,
                        float(np.sum(np.abs(s.pseudo - s.pseudo_theory))), max_z])
    return out_dir / f"{stem}.json"


# --------------------------------------------------------------------------
# local law scan


def loglog_slope(ns, values):
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])


def local_law_scan(dims, samples, z=1.5, law=EntryLaw.COMPLEX_GAUSSIAN, master_seed=0,
                   eta=None, matrix=MatrixSpec("identity")):
    """Median ``|<A (G_z - M_z)^[kl]>|`` over ``samples`` draws for each ``N`` and block.

    ``eta`` is a function of ``N`` (default ``N^-2``) or a constant.

    Returns
    -------
    dict
        ``dims``, ``z``, ``medians`` and ``mads`` (``{"11": [...], ...}``,
        one entry per ``N``), and the log-log ``slopes`` of the medians.
    """
    blocks = [(1, 1), (1, 2), (2, 1), (2, 2)]
    med = {f"{k}{l}": [] for k, l in blocks}
    mad = {f"{k}{l}": [] for k, l in blocks}
    for n in dims:
        if eta is None:
            eta_n = float(n) ** -2
        elif callable(eta):
            eta_n = float(eta(n))
        else:
            eta_n = float(eta)
        a = matrix.build(n)
        errs = {b: [] for b in blocks}
        for i in range(samples):
            x = sample_iid(n, law, SampleSeed(master_seed, (int(n) << 32) | i))
            e = local_law_errors(ResolventWorkspace.build(x, z, eta_n), a)
            for b in blocks:
                errs[b].append(abs(e[b]))
        for k, l in blocks:
            v = np.asarray(errs[(k, l)])
            m = float(np.median(v))
            med[f"{k}{l}"].append(m)
            mad[f"{k}{l}"].append(float(np.median(np.abs(v - m))))
    slopes = {key: loglog_slope(dims, v) for key, v in med.items()}
    return {
        "dims": list(dims),
        "z": complex(z),
        "samples": samples,
        "seed": master_seed,
        "medians": med,
        "mads": mad,
        "slopes": slopes,
    }


LOCAL_LAW_COLUMNS = ["N", "z_re", "z_im", "block", "median_error", "mad", "samples", "seed"]


def write_local_law_csv(result, path):
    """Long-form CSV of a ``local_law_scan`` result (``LOCAL_LAW_COLUMNS``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOCAL_LAW_COLUMNS)
        z = result["z"]
        for i, n in enumerate(result["dims"]):
            for block, vals in result["medians"].items():
                w.writerow([n, z.real, z.imag, block, vals[i], result["mads"][block][i],
                            result["samples"], result["seed"]])
