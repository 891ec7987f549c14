import math

import numpy as np
import pytest

from wedgeshock.errors import FrameError, NoIntersection
from wedgeshock.gasdyn import Point
from wedgeshock.geometry import (Frame, SonicArc, WedgeConfig, alpha0_displayed, export_polylines_csv,
                                 frame_transform, reflect_across_axis, relative_position, shifted_sonic,
                                 sonic_arcs, sonic_intersection, wall_direction)
from wedgeshock.states import nonsym_states, solve_regular, sonic_point


def test_sonic_point_normal_reflection(params, nr):
    J = sonic_intersection(solve_regular(params, 0.0), params)
    assert (J.xi, J.eta) == pytest.approx((-nr.Z, nr.Y), abs=1e-12)


def test_sonic_point_small_sigma(params, nr):
    s = 1e-3
    J0 = sonic_intersection(solve_regular(params, 0.0), params)
    J = sonic_intersection(solve_regular(params, s), params)
    k = nr.Z / params.X + 1
    pred = (k * math.sqrt(nr.c2bar2 - nr.Z ** 2), k * (params.u1 + nr.Z))
    assert (J.xi - J0.xi) == pytest.approx(s * pred[0], abs=1e-5)
    assert (J.eta - J0.eta) == pytest.approx(s * pred[1], abs=1e-5)


def test_sonic_point_no_intersection(params, nr):
    with pytest.raises(NoIntersection):
        sonic_point(0.0, 0.0, nr.rho2bar, params, radius2=0.01)


def test_reflection_involution():
    p = Point(0.3, 0.7)
    assert reflect_across_axis(p) == Point(0.3, -0.7)
    assert reflect_across_axis(reflect_across_axis(p)) == p
    a = np.array([[1.0, 2.0], [3.0, -4.0]])
    assert np.array_equal(reflect_across_axis(reflect_across_axis(a)), a)


def test_reflected_minus_arc_equals_plus_of_negative_delta(params):
    am = sonic_arcs(nonsym_states(params, 0.02, 0.01))[1]
    ap = sonic_arcs(nonsym_states(params, 0.02, -0.01))[0]
    r = reflect_across_axis(am)
    pa, pb = r.sample(64), ap.sample(64)
    assert np.max(np.abs(pa - pb)) < 1e-10


def test_axis_symmetric_arc_fixed():
    arc = SonicArc(Point(0.1, 0.0), 1.0, -0.5, 0.5)
    r = reflect_across_axis(arc)
    assert (r.center, r.radius, r.alpha_lo, r.alpha_hi) == (arc.center, 1.0, -0.5, 0.5)


def test_reflection_wrong_frame():
    arc = SonicArc(Point(0.1, 0.0), 1.0, -0.5, 0.5, Frame.WALL_PLUS_ETA)
    with pytest.raises(FrameError):
        reflect_across_axis(arc)


def test_relative_position(params):
    ap, am = sonic_arcs(nonsym_states(params, 0.02, 0.0))
    rep = relative_position(ap, reflect_across_axis(am))
    assert abs(rep.clearance) < 1e-12
    ap, am = sonic_arcs(nonsym_states(params, 0.02, 0.01))
    rep = relative_position(ap, reflect_across_axis(am))
    assert rep.above and rep.clearance > 0
    ap, am = sonic_arcs(nonsym_states(params, 0.02, -0.01))
    rep = relative_position(ap, reflect_across_axis(am))
    assert not rep.above and rep.clearance < 0


def test_shifted_sonic(params, nr):
    ns0 = nonsym_states(params, 0.01, 0.0)
    Jp, Jm, _, _ = shifted_sonic(ns0, params)
    assert Jp == ns0.J_plus and Jm == ns0.J_minus
    h = 1e-5
    a = shifted_sonic(nonsym_states(params, 0.01, h), params)[0]
    b = shifted_sonic(nonsym_states(params, 0.01, -h), params)[0]
    slope = (a.xi - b.xi) / (2 * h)
    lead = 0.75 * math.sqrt(11 / 6)
    assert abs(slope - lead) < 5 * 0.01


def test_frames():
    cfg = WedgeConfig(0.05, 0.02, normal_angle=0.3)
    p = np.array([0.4, -0.2])
    assert np.array_equal(frame_transform(p, Frame.SYM_WEDGE, Frame.SYM_WEDGE, cfg), p)
    w = frame_transform(wall_direction(0.05), Frame.SYM_WEDGE, Frame.WALL_PLUS_ETA, cfg)
    assert w == pytest.approx([0.0, 1.0], abs=1e-15)
    direct = frame_transform(p, Frame.SYM_WEDGE, Frame.WALL_PLUS_ETA, cfg)
    via = frame_transform(frame_transform(p, Frame.SYM_WEDGE, Frame.FLOW_ALIGNED, cfg),
                          Frame.FLOW_ALIGNED, Frame.WALL_PLUS_ETA, cfg)
    assert np.max(np.abs(direct - via)) < 1e-14
    u = frame_transform(np.array([math.cos(0.02), math.sin(0.02)]), Frame.SYM_WEDGE, Frame.FLOW_ALIGNED, cfg)
    assert u == pytest.approx([1.0, 0.0], abs=1e-15)


def test_arc_window_ends_at_sonic_point(params, nr):
    ns = nonsym_states(params, 0.02, 0.0)
    ap, _ = sonic_arcs(ns)
    end = ap.point(ap.alpha_hi)
    assert end == pytest.approx([ns.J_plus.xi, ns.J_plus.eta], abs=1e-12)
    # the displayed window half-angle overshoots the true offset of J from the wall point
    assert alpha0_displayed(nr.Z, math.sqrt(nr.c2bar2)) > ap.alpha_hi - ap.alpha_lo


def test_polyline_export(tmp_path):
    path = tmp_path / "c.csv"
    export_polylines_csv(path, {"a": [[0.0, 1.0], [2.0, 3.0]]})
    raw = path.read_bytes()
    assert raw.startswith(b"xi,eta,tag\n") and b"\r" not in raw
