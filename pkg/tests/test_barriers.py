import math

import mpmath as mp
import numpy as np
import pytest

from wedgeshock.barriers import (SingularCoeffBounds, a2_barrier, a2_feasible_gamma, a2_gamma_threshold,
                                 a3_barrier, a3_constants, barrier_A3, check_conformal_bounds,
                                 conformal_coeffs, eps_A1, eps_A1_detail, golden_max, ks_constants,
                                 ks_worst_Dbeta, verify_A2_barrier, verify_ks_testfn)
from wedgeshock.errors import DomainError, ParameterInfeasible

WORKED = SingularCoeffBounds(1.0, 1.0, 1.0, 0.5, 0.1)


def test_eps_A1_high_precision():
    mp.mp.dps = 40
    a = mp.mpf(1) / 2
    E = 4 * (1 + mp.pi / a) / mp.pi
    ref = min(mp.sqrt(a) / (8 * mp.sqrt(mp.pi)) / mp.sqrt(mp.exp(E) - 1), mp.exp(-4))
    assert eps_A1(WORKED) == pytest.approx(float(ref), rel=1e-13)
    assert eps_A1(WORKED) == pytest.approx(0.00048326137909406, rel=1e-12)


def test_eps_A1_monotone_and_cap():
    vals = [eps_A1(SingularCoeffBounds(1.0, 1.0, c, 0.5, 0.1)) for c in (0.2, 0.5, 1.0, 2.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert eps_A1(SingularCoeffBounds(1.0, 1.0, 1e-6, 0.99, 0.1)) == pytest.approx(math.exp(-4))
    val, flag = eps_A1_detail(SingularCoeffBounds(1e-3, 1.0, 1.0, 0.5, 0.1))
    assert val == 0.0 and flag


def test_conformal_identity_cases():
    n = 5
    a = np.tile(np.eye(2), (n, 1, 1))
    bvec = np.zeros((n, 3))
    r = np.linspace(0.01, 0.1, n)
    ang = np.linspace(0.1, 1.5, n)
    at, bt = conformal_coeffs(a, bvec, r, ang, 1.3, 1.3)
    assert np.allclose(at, a, atol=1e-15) and np.allclose(bt, 0, atol=1e-15)
    al = 0.5
    at, bt = conformal_coeffs(a, bvec, r, ang, al / 2 * math.pi / 2, math.pi / 2)
    assert np.allclose(at, al ** 2 / 4 * a, atol=1e-15)


@pytest.mark.parametrize("lam,Lam", [(1.0, 1.0), (0.5, 2.0)])
def test_conformal_eigen_bounds(lam, Lam):
    v = check_conformal_bounds(SingularCoeffBounds(lam, Lam, 1.0, 0.5, 0.1), n=10_000, seed=3)
    assert v.ok, v.witness
    assert v.checks["n_samples"] == 10_000


def test_a2_threshold_quadratic():
    g = a2_gamma_threshold(1.0, 1.0, 0.0)
    assert g == pytest.approx((1 + math.sqrt(2)) / 2, rel=1e-15)
    assert -4 * g * g + 4 * g + 1 == pytest.approx(0.0, abs=1e-14)


def test_a2_verdicts():
    g = a2_gamma_threshold(1.0, 1.0, 0.0)
    ok = verify_A2_barrier(1.0, 1.0, 0.0, 0.0, 0.5, 0.8, 0.1, 1.25 * g, n=200)
    assert ok.ok
    bad = verify_A2_barrier(1.0, 1.0, 0.0, 0.0, 0.5, 0.8, 0.1, 0.5 * g, n=200)
    assert not bad.ok and bad.witness is not None


def test_a2_infeasible_reports_gap():
    with pytest.raises(ParameterInfeasible) as exc:
        a2_feasible_gamma(1.0, 1.0, 5.0, 0.5)
    assert exc.value.context["root_gap"] > 0


def test_a2_barrier_derivatives():
    x, y, h = 0.3, 0.2, 1e-6
    w, (gx, gy), (hxx, hxy, hyy) = a2_barrier(x, y, 0.1, 2.0, 1.5)
    f = lambda a, b: a2_barrier(a, b, 0.1, 2.0, 1.5)[0]
    assert gx == pytest.approx((f(x + h, y) - f(x - h, y)) / (2 * h), rel=1e-7)
    assert hxy == pytest.approx((f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h),
                                rel=1e-4)


def test_a3_constants_high_precision():
    mp.mp.dps = 40
    r0, a = mp.mpf("0.1"), mp.mpf("0.5")
    # C1: the maximiser exp(-1/alpha) lies beyond r0, so the supremum is the endpoint value
    C1 = 2 * r0 ** a * (-mp.log(r0))
    f2 = lambda s: (mp.exp(a * s) + mp.exp((a + 1) * s)) * s ** 2  # in s = log y
    s2 = mp.findroot(lambda s: mp.diff(f2, s), mp.mpf(-4))
    assert s2 < mp.log(r0)
    C2 = f2(s2)
    g = max(C1, C2) + 1
    # sup of y (-log y)^(g+1) at y = exp(-(g+1))
    mu = g / (mp.exp(-(g + 1)) * (g + 1) ** (g + 1)) / 6
    k = a3_constants(WORKED)
    assert k.C1 == pytest.approx(float(C1), rel=1e-10)
    assert k.C2 == pytest.approx(float(C2), rel=1e-10)
    assert k.gamma == pytest.approx(float(g), rel=1e-10)
    assert k.mu == pytest.approx(float(mu), rel=1e-9)
    assert k.eps_A3 == pytest.approx(float(r0 ** 2 * mu / 4), rel=1e-9)


def test_a3_verdicts():
    k, v = barrier_A3(WORKED, n=200)
    assert v.ok
    _, half = barrier_A3(WORKED, n=200, gamma_scale=0.5)
    assert not half.ok and half.witness is not None
    assert half.witness["kind"] == "proof_step"
    _, tenth = barrier_A3(WORKED, n=200, gamma_scale=0.1)
    assert not tenth.ok and tenth.witness["kind"] == "interior"


def test_a3_barrier_decay():
    y = 1e-8
    w, _, _ = a3_barrier(0.0, y, 3.0, 0.1)
    assert w == pytest.approx(y / (-math.log(y)) ** 3, rel=1e-14)


def test_golden_max():
    x, v = golden_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-6) and v == pytest.approx(0.0, abs=1e-12)


def test_ks_constants_exact():
    k = ks_constants(1.0)
    assert (k.H, k.eps_K, k.r_K) == (63 / 64, 1 / 64, 1 / 4)
    with pytest.raises(DomainError):
        ks_constants(0.5)


def test_ks_flat_boundary():
    k = ks_constants(1.0)
    val = ks_worst_Dbeta(k.eps_K, 0.0, k)
    assert val == pytest.approx(2 * 63 / 64 - 2 / 64, rel=1e-15)
    assert val > 0.5 - 2 * k.eps_K
    xs = np.linspace(-k.r_K, k.r_K, 201)
    v = verify_ks_testfn(1.0, k.eps_K, np.stack([xs, np.zeros_like(xs)], 1))
    assert v.ok


def test_ks_double_eps_fails():
    k = ks_constants(1.0)
    xs = np.linspace(-k.r_K, k.r_K, 201)
    v = verify_ks_testfn(1.0, 2 * k.eps_K, np.stack([xs, 2 * k.eps_K * np.abs(xs)], 1))
    assert not v.ok and {"x", "y"} <= set(v.witness)
