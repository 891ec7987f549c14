import math

import numpy as np
import pytest

from wedgeshock.perturbation import (band_scaling, nonsymmetric_derivatives, richardson_central,
                                     sonic_motion, sonic_motion_leading, symmetric_derivatives)
from wedgeshock.states import gas_params


def _by_name(reports):
    return {r.name: r for r in reports}


def test_symmetric_worked_case(params):
    r = _by_name(symmetric_derivatives(params))
    assert r["theta"].closed_form == pytest.approx(0.75, rel=1e-14)
    assert abs(r["theta"].fd_value - 0.75) < 1e-6
    assert abs(r["b"].fd_value) < 1e-6 and abs(r["rho2"].fd_value) < 1e-6
    assert r["v2"].closed_form == pytest.approx(1.4288690166235205, rel=1e-12)
    assert abs(r["v2"].fd_value - r["v2"].closed_form) < 1e-6
    assert abs(r["u2"].fd_value) < 1e-6


@pytest.mark.parametrize("gamma", [1.4, 2.0, 2.5])
@pytest.mark.parametrize("ratio", [1.5, 2.0, 3.0])
def test_symmetric_grid(gamma, ratio):
    for rep in symmetric_derivatives(gas_params(gamma, 1.0, ratio)):
        assert rep.discrepancy < 1e-5, rep.name


def test_richardson_order():
    _, _, order = richardson_central(lambda x: np.array([math.sin(3 * x), math.exp(x)]), 0.2)
    assert order >= 1.8


def test_nonsymmetric_leading(params):
    r = _by_name(nonsymmetric_derivatives(params, 0.02))
    assert r["v2_plus"].closed_form == pytest.approx(1.4288690166235205, rel=1e-12)
    assert abs(r["v2_plus"].fd_value - r["v2_plus"].closed_form) <= r["v2_plus"].band + 1e-12
    # u1 (Z/X + 1) + Z^2/X = 1.4288690 + 0.9185587
    assert r["eta_J_plus"].closed_form == pytest.approx(2.3474276701672, abs=1e-12)
    assert r["v2_plus"].band < 10 * 0.02


def test_band_exponents(params):
    fits = band_scaling(params, (0.04, 0.02, 0.01))
    for name, f in fits.items():
        assert f["exponent"] is not None and f["exponent"] >= 0.8, name
    assert fits["u2_plus"]["K"] < 5


def test_sonic_motion(params):
    rep = sonic_motion(params, 0.01, [0.002, 0.005, 0.01])
    assert rep.sign_ok and min(rep.min_vertical) > 0
    neg = sonic_motion(params, 0.01, [0.002, 0.005, 0.01], arc_name="minus_reflected")
    assert neg.sign_ok and max(neg.max_vertical) < 0


def test_sonic_motion_leading(params, nr):
    out = sonic_motion_leading(params)
    assert out["extrapolated"] == pytest.approx(params.u1 * (nr.Z / params.X + 1), abs=1e-3)
