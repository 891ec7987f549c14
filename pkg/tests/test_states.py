import math

import mpmath as mp
import numpy as np
import pytest
from scipy.optimize import bisect

from wedgeshock.errors import ContinuationBreakdown, NoAdmissibleRoot
from wedgeshock.gasdyn import FlowState, incident_residuals
from wedgeshock.states import (gas_params, nonsym_states, normal_residuals, psi1_closed_form,
                               psi_hat1_closed_form, regular_residuals, shifted_potentials, solve_incident,
                               solve_normal, solve_regular, state_potential)


def test_incident_worked_case():
    u1, X = solve_incident(2.0, 1.0, 2.0)
    assert u1 == pytest.approx(math.sqrt(2 / 3), rel=1e-14)
    assert X == pytest.approx(2 * math.sqrt(2 / 3), rel=1e-14)


def test_incident_weak_shock():
    u1, X = solve_incident(2.0, 1.0, 1.0 + 1e-8)
    assert u1 < 1e-3
    assert max(abs(r) for r in incident_residuals(2.0, 1.0, 1.0 + 1e-8, u1, X)) < 1e-12


def test_incident_bisection_oracle():
    g, r0, r1 = 1.4, 1.0, 1.5

    def f(u1):
        X = r1 * u1 / (r1 - r0)
        return incident_residuals(g, r0, r1, u1, X)[1]
    ref = bisect(f, 1e-6, 5.0, xtol=1e-15, rtol=1e-15)
    assert solve_incident(g, r0, r1)[0] == pytest.approx(ref, abs=1e-12)


def test_incident_rejects_expansion():
    with pytest.raises(NoAdmissibleRoot):
        solve_incident(1.4, 2.0, 1.0)


def test_normal_worked_case(params, nr):
    assert nr.Z == pytest.approx(math.sqrt(1.5), rel=1e-12)
    assert nr.rho2bar == pytest.approx(10 / 3, rel=1e-12)
    assert nr.c2bar2 == pytest.approx(10 / 3, rel=1e-12)
    assert nr.Y == pytest.approx(math.sqrt(11 / 6), rel=1e-12)
    assert nr.Z ** 2 < nr.c2bar2
    assert max(abs(r) for r in normal_residuals(nr, params)) < 1e-13
    # Z solves Z^2 + Z/(3 u1) - 2 = 0
    assert nr.Z ** 2 + nr.Z / (3 * params.u1) - 2 == pytest.approx(0, abs=1e-13)


@pytest.mark.parametrize("ratio", [1.1, 1.5, 2.0, 3.0, 5.0])
def test_normal_admissible_gamma14(ratio):
    p = gas_params(1.4, 1.0, ratio)
    nr = solve_normal(p)
    assert nr.Z > 0 and nr.rho2bar > p.rho1 and nr.Z ** 2 < nr.c2bar2


def test_regular_base_point(params, nr):
    rr = solve_regular(params, 0.0)
    assert (rr.v2, rr.rho2, rr.b, rr.theta) == pytest.approx((0.0, nr.rho2bar, nr.Z, 0.0), abs=1e-12)


def test_regular_small_angle(params):
    assert solve_regular(params, 1e-3).theta == pytest.approx(7.5e-4, abs=1e-6)


def test_regular_residuals(params):
    rr = solve_regular(params, 1e-2)
    res = regular_residuals((rr.v2, rr.rho2, rr.b, rr.theta), 1e-2, params)
    assert np.max(np.abs(res)) < 1e-10


def test_regular_breakdown_beyond_limit(params):
    with pytest.raises(ContinuationBreakdown):
        solve_regular(params, 1.0)


def test_nonsym_delta_zero(params):
    ns = nonsym_states(params, 0.02, 0.0)
    assert ns.plus_state.v == pytest.approx(-ns.minus_state.v, abs=1e-15)
    assert ns.plus_state.u == pytest.approx(ns.minus_state.u, abs=1e-15)


def test_nonsym_sum_band(params, nr):
    # v2+ + (mirrored v2-) grows like 2 u1 (Z/X + 1) delta up to an O(sigma0 delta) band
    s0, d = 0.02, 0.01
    ns = nonsym_states(params, s0, d)
    lead = 2 * params.u1 * (nr.Z / params.X + 1) * d
    band = abs(ns.plus_state.v + ns.minus_state.v - lead)
    assert band < 5 * s0 * d


def test_nonsym_edge_wall_condition(params):
    ns = nonsym_states(params, 0.02, 0.02)
    # at delta = sigma0 the minus state sits on an unturned lower wall: zero wall-normal velocity
    w = np.array([math.sin(0.02), -math.cos(0.02)])
    n = np.array([w[1], -w[0]])
    assert abs(np.dot(n, [ns.minus_state.u, ns.minus_state.v])) < 1e-12


def test_state_potential(params, nr):
    rest = state_potential(FlowState(0.0, 0.0, params.rho0), params)
    assert (rest.a, rest.b, rest.c) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)
    p1 = state_potential(FlowState(params.u1, 0.0, params.rho1), params)
    assert p1(0.7, 0.2) == pytest.approx(params.u1 * (0.7 - params.X), rel=1e-14)
    ns = nonsym_states(params, 0.02, 0.0)
    pot = state_potential(ns.plus_state, params)
    x, y = 0.3, -0.1
    br = params.k0 - pot(x, y) + pot.a * x + pot.b * y - 0.5 * (pot.a ** 2 + pot.b ** 2)
    assert abs(br ** (1 / (params.gamma - 1)) - ns.plus_state.rho) < 1e-12


def test_shifted_potentials(params):
    sp0 = shifted_potentials(params, 0.02, 0.0)
    assert sp0.shift == (0.0, 0.0)
    sp = shifted_potentials(params, 0.02, 0.01)
    slope, const = psi1_closed_form(params, 0.02, 0.01)
    assert (sp.psi1.a, sp.psi1.b, sp.psi1.c) == pytest.approx((slope, 0.0, const), abs=1e-14)
    hs, hc = psi_hat1_closed_form(params, 0.02, 0.01)
    assert (sp.psi_hat1.a, sp.psi_hat1.c) == pytest.approx((hs, hc), abs=1e-14)
    xs = np.linspace(-1.5, 0.5, 41)
    gap = np.max(np.abs(sp.psi_hat1(xs, 0.3) - sp.psi1(xs, 0.3)))
    assert gap / (0.02 * 0.01) < 10


def test_worked_constants_high_precision(nr, params):
    mp.mp.dps = 30
    u1 = mp.sqrt(mp.mpf(2) / 3)
    Z = (-1 / (3 * u1) + mp.sqrt(1 / (9 * u1 ** 2) + 8)) / 2
    assert nr.Z == pytest.approx(float(Z), rel=1e-13)
