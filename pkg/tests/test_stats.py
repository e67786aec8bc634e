from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fclt.contour import make_contour
from fclt.ensemble import SampleSeed, sample_iid
from fclt.errors import NearSingularNode
from fclt.functions import PowerSeries, monomial
from fclt.hermitize import girko_free_bound, omega_check
from fclt.stats import (
    StatRecord,
    contour_workspaces,
    trace_f_direct,
    trace_f_hermitized,
    trace_f_horner,
)

DELTA, KAPPA = 1.0, 0.1
C64 = make_contour(1.5, 64)
C128 = make_contour(1.5, 128)


def passing_sample(n, law="complex-gaussian", start=0):
    for i in range(start, start + 50):
        x = sample_iid(n, law, SampleSeed(99, i))
        v = omega_check(x, DELTA, KAPPA)
        if v.passed:
            return x, v
    raise AssertionError("no passing sample")


def test_zero_matrix_examples():
    n = 6
    x = np.zeros((n, n))
    eta = n**-2.0
    r = trace_f_hermitized(x, monomial(2), np.eye(n), C64)
    assert abs(r.value) <= girko_free_bound(1.5, n, eta) * 2 * np.pi * 1.5 + 1e-12
    r = trace_f_hermitized(x, PowerSeries([1, 1]), np.eye(n), C64)
    assert r.value == pytest.approx(n, rel=1e-3)
    assert abs(r.value - n) <= girko_free_bound(1.5, n, eta) * 2 * np.pi * 1.5 * 2
    for k in (1, 2, 5):
        assert abs(trace_f_direct(x, monomial(k), np.eye(n), C64).value) <= 1e-12


def test_horner_examples():
    x = sample_iid(7, "complex-gaussian", SampleSeed(1))
    assert trace_f_horner(x, monomial(1), np.eye(7)).value == pytest.approx(np.trace(x))
    nil = np.array([[0.0, 3.0], [0.0, 0.0]])
    assert trace_f_horner(nil, monomial(2), np.eye(2)).value == 0
    double_sum = sum(x[i, j] * x[j, i] for i in range(7) for j in range(7))
    assert trace_f_horner(x, monomial(2), np.eye(7)).value == pytest.approx(double_sum, rel=1e-12)


@pytest.mark.parametrize("law", ["complex-gaussian", "real-gaussian"])
def test_three_way_agreement(law):
    n = 64
    x, v = passing_sample(n, law)
    eta = n**-2.0
    f = PowerSeries([0.3, -0.2j, 0.5, 1.0])
    for a in (np.eye(n), np.roll(np.eye(n), 1, axis=1)):
        herm = trace_f_hermitized(x, f, a, C128, omega=v).value
        direct = trace_f_direct(x, f, a, C128).value
        horner = trace_f_horner(x, f, a).value
        scale = max(1.0, abs(horner))
        assert abs(direct - horner) <= 1e-8 * scale
        assert abs(herm - horner) <= 1e-6 * scale
        # per-node Girko bound times the contour length factor |dz|/(2 pi) sup|f|
        assert abs(herm - direct) <= girko_free_bound(v.min_sigma, n, eta) * 1.5 * f.sup_norm_proxy(1.5)


def test_node_doubling():
    n = 64
    x, v = passing_sample(n)
    a = np.eye(n)
    f = monomial(3)
    r1 = trace_f_hermitized(x, f, a, make_contour(1.5, 128)).value
    r2 = trace_f_hermitized(x, f, a, make_contour(1.5, 256)).value
    assert abs(r1 - r2) <= 1e-9 * max(1.0, abs(r1))


def test_real_symmetry_shortcut():
    n = 32
    x, _ = passing_sample(n, "real-gaussian")
    f = PowerSeries([0, 1j, 0.5])
    a = np.roll(np.eye(n), 1, axis=1) * (1 + 0.5j)
    fast = trace_f_hermitized(x, f, a, C64)
    full_ws = contour_workspaces(x, C64, symmetric=False)
    full = trace_f_hermitized(x, f, a, C64, workspaces=full_ws)
    assert sum(w is None for w in contour_workspaces(x, C64)) == 31
    assert fast.value == pytest.approx(full.value, rel=1e-12, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6), s=st.floats(-1, 1))
def test_linearity(seed, s):
    n = 16
    rng = np.random.default_rng(seed)
    x = sample_iid(n, "complex-gaussian", SampleSeed(seed))
    a1 = np.diag(rng.uniform(-1, 1, n))
    a2 = s * np.roll(np.eye(n), 1, axis=1)
    f = PowerSeries([0.1, 0.2, 0.3])
    ws = contour_workspaces(x, C64)
    for method in ("herm", "direct", "horner"):
        def run(a):
            if method == "herm":
                return trace_f_hermitized(x, f, a, C64, workspaces=ws).value
            if method == "direct":
                return trace_f_direct(x, f, a, C64).value
            return trace_f_horner(x, f, a).value

        whole, parts = run(a1 + a2), run(a1) + run(a2)
        assert abs(whole - parts) <= 1e-10 * max(1.0, abs(whole))


def test_record_validity():
    v = omega_check(np.zeros((4, 4)), 0.5, 0.2)
    good = StatRecord(1.0, "horner-oracle", v)
    assert good.valid
    assert not StatRecord(1.0, "contour-hermitized", v, node_failures=1).valid
    x = np.zeros((4, 4))
    x[0, 0] = 1.25
    failed = omega_check(x, 0.5, 0.2)
    assert not good.with_omega(failed).valid
    with pytest.raises(ValueError):
        StatRecord(1.0, "eigenvalues")


def test_direct_near_singular():
    x = np.zeros((4, 4))
    x[0, 0] = 1.5  # eigenvalue on the node z = 1.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(NearSingularNode):
            trace_f_direct(x, monomial(1), np.eye(4), make_contour(1.5, 16))


def test_node_failure_voids_record():
    x = np.zeros((4, 4))
    x[0, 0] = 1.5
    r = trace_f_hermitized(x, monomial(1), np.eye(4), make_contour(1.5, 16), eta=1e-12)
    if r.node_failures:
        assert not r.valid and np.isnan(r.value)
