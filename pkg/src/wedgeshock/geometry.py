"""Reflection geometry: sonic arcs, reflected-shock lines and frame changes.

Unless tagged otherwise, objects live in the symmetric-wedge frame: the wedge
corner is at the origin, the walls leave it along (sin s0, +-cos s0) and the
upstream flow is u1 (cos d, sin d).
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, FrameError, NoIntersection
from .gasdyn import FlowState, GasParams, Point
from .states import NonSymmetricStates, RegularReflection, rotate, sonic_line


class Frame(str, enum.Enum):
    SYM_WEDGE = "sym_wedge"          # wedge symmetric about the xi-axis
    FLOW_ALIGNED = "flow_aligned"    # upstream flow along +xi
    WALL_PLUS_ETA = "wall_plus_eta"  # upper wall along +eta
    SHOCK_NORMAL = "shock_normal"    # a chosen shock normal along +xi


@dataclass(frozen=True)
class WedgeConfig:
    sigma0: float
    delta: float = 0.0
    frame: Frame = Frame.SYM_WEDGE
    normal_angle: float = 0.0  # shock-normal angle in the symmetric-wedge frame

    def __post_init__(self):
        if not 0 < self.sigma0 < math.pi / 2:
            raise DomainError("sigma0 must lie in (0, pi/2)", sigma0=self.sigma0)
        if abs(self.delta) > self.sigma0:
            raise DomainError("|delta| must not exceed sigma0", sigma0=self.sigma0, delta=self.delta)

    def angle(self, frame: Frame) -> float:
        """Rotation taking symmetric-wedge coordinates to ``frame`` coordinates."""
        return {Frame.SYM_WEDGE: 0.0, Frame.FLOW_ALIGNED: -self.delta,
                Frame.WALL_PLUS_ETA: self.sigma0, Frame.SHOCK_NORMAL: -self.normal_angle}[Frame(frame)]


@dataclass(frozen=True)
class SonicArc:
    center: Point
    radius: float
    alpha_lo: float
    alpha_hi: float
    frame: Frame = Frame.SYM_WEDGE

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("arc radius must be positive", radius=self.radius)
        if not self.alpha_hi > self.alpha_lo:
            raise DomainError("arc angular interval is empty", lo=self.alpha_lo, hi=self.alpha_hi)

    def point(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return np.stack([self.center.xi + self.radius * np.cos(a),
                         self.center.eta + self.radius * np.sin(a)], axis=-1)

    def sample(self, n: int = 256) -> np.ndarray:
        return self.point(np.linspace(self.alpha_lo, self.alpha_hi, n))

    @property
    def length(self) -> float:
        return self.radius * (self.alpha_hi - self.alpha_lo)


@dataclass(frozen=True)
class ShockRay:
    anchor: Point
    direction: tuple
    frame: Frame = Frame.SYM_WEDGE

    def __post_init__(self):
        d = self.direction
        if abs(math.hypot(d[0], d[1]) - 1) > 1e-12:
            raise DomainError("shock ray direction must be a unit vector")

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.direction[1], -self.direction[0]])

    def at(self, s):
        s = np.asarray(s, dtype=float)
        return np.stack([self.anchor.xi + s * self.direction[0], self.anchor.eta + s * self.direction[1]], axis=-1)


# ---------------------------------------------------------------- intersections

def sonic_intersection(rr: RegularReflection, params: GasParams) -> Point:
    """J for a symmetric regular reflection, with circle and line residuals checked."""
    from .states import sonic_point
    J = sonic_point(rr.u2, rr.v2, rr.rho2, params)
    circ = (J.xi - rr.u2) ** 2 + (J.eta - rr.v2) ** 2 - rr.c2 ** 2
    A, B, C = sonic_line(rr.u2, rr.v2, rr.rho2, params)
    line = A * J.xi + B * J.eta + C
    if abs(circ) > 1e-10 * max(1.0, rr.c2 ** 2) or abs(line) > 1e-10 * max(1.0, params.u1 ** 2):
        raise NoIntersection("intersection residuals exceed tolerance", circle=circ, line=line)
    return J


def wall_direction(sigma0: float, side: int = 1) -> np.ndarray:
    return np.array([math.sin(sigma0), side * math.cos(sigma0)])


def alpha0_displayed(Z: float, c2: float) -> float:
    """Angular window pi/2 - arccos(Z/c2)/2 of the displayed arc parametrisation."""
    return math.pi / 2 - 0.5 * math.acos(Z / c2)


def sonic_arcs(ns: NonSymmetricStates) -> tuple[SonicArc, SonicArc]:
    """Gamma_sonic+ and Gamma_sonic- as arcs from the wall point to J+ / J-.

    The plus arc starts at angle pi/2 - sigma0 (where the circle meets the upper
    wall) and ends at J+; the minus arc is the analogue below the axis.
    """
    s0 = ns.sigma0
    cp = ns.plus_state
    cm = ns.minus_state
    ap = math.atan2(ns.J_plus.eta - cp.v, ns.J_plus.xi - cp.u)
    am = math.atan2(ns.J_minus.eta - cm.v, ns.J_minus.xi - cm.u)
    plus = SonicArc(Point(cp.u, cp.v), ns.c2_plus, math.pi / 2 - s0, ap)
    minus = SonicArc(Point(cm.u, cm.v), ns.c2_minus, am, -(math.pi / 2 - s0))
    return plus, minus


def shock_rays(ns: NonSymmetricStates, params: GasParams) -> tuple[ShockRay, ShockRay]:
    """Straight reflected-shock lines through J+ and J-.

    The line normal is parallel to the velocity jump U1 - U2.  Directions point
    from J towards the axis side of the shock (decreasing |eta|).
    """
    u1 = ns.upstream_state(params)
    out = []
    for st, J, side in ((ns.plus_state, ns.J_plus, 1), (ns.minus_state, ns.J_minus, -1)):
        n = np.array([u1.u - st.u, u1.v - st.v])
        t = np.array([-n[1], n[0]]) / np.hypot(*n)
        if t[1] * side > 0:
            t = -t
        out.append(ShockRay(J, (float(t[0]), float(t[1]))))
    return out[0], out[1]


def wall_point(arc: SonicArc, side: int) -> np.ndarray:
    return arc.point(arc.alpha_lo if side > 0 else arc.alpha_hi)


# ---------------------------------------------------------------- reflections

def reflect_across_axis(obj):
    """eta -> -eta for points, arrays, arcs, rays, flow states or scalar fields."""
    frame = getattr(obj, "frame", Frame.SYM_WEDGE)
    if Frame(frame) != Frame.SYM_WEDGE:
        raise FrameError("reflection needs the symmetric-wedge frame", frame=str(frame))
    if isinstance(obj, Point):
        return Point(obj.xi, -obj.eta)
    if isinstance(obj, SonicArc):
        return SonicArc(Point(obj.center.xi, -obj.center.eta), obj.radius, -obj.alpha_hi, -obj.alpha_lo)
    if isinstance(obj, ShockRay):
        return ShockRay(Point(obj.anchor.xi, -obj.anchor.eta), (obj.direction[0], -obj.direction[1]))
    if isinstance(obj, FlowState):
        return FlowState(obj.u, -obj.v, obj.rho)
    if callable(obj):
        return lambda xi, eta: obj(xi, -np.asarray(eta))
    a = np.array(obj, dtype=float)
    a[..., 1] *= -1
    return a


@dataclass(frozen=True)
class PositionReport:
    above: bool
    clearance: float
    witness: tuple
    shock_clear: bool | None = None

    def as_dict(self):
        return {"above": self.above, "clearance": self.clearance, "witness": list(self.witness),
                "shock_clear": self.shock_clear}


def _upper_eta(arc: SonicArc, xi):
    r2 = arc.radius ** 2 - (xi - arc.center.xi) ** 2
    return arc.center.eta + np.sqrt(np.maximum(r2, 0.0))


def relative_position(plus: SonicArc, minus_reflected: SonicArc, shock=None, n: int = 256) -> PositionReport:
    """Is Gamma_sonic+ above the reflected Gamma_sonic-?  Minimal vertical clearance with witness.

    Both arcs lie on the upper halves of their circles, so they are graphs over
    xi and the clearance is compared on their common xi-range.  ``shock`` is an
    optional polyline (for instance the reflected minus shock) that must not
    cross Gamma_sonic+.
    """
    pts = plus.sample(n)
    other = minus_reflected.sample(n)
    lo, hi = max(pts[:, 0].min(), other[:, 0].min()), min(pts[:, 0].max(), other[:, 0].max())
    xs = np.linspace(lo, hi, n)
    gap = _upper_eta(plus, xs) - _upper_eta(minus_reflected, xs)
    i = int(np.argmin(gap))
    shock_clear = None
    if shock is not None:
        from shapely.geometry import LineString
        shock_clear = not LineString(pts).intersects(LineString(np.asarray(shock)))
    clearance = float(gap[i])
    return PositionReport(clearance > 0, clearance, (float(xs[i]), float(_upper_eta(plus, xs[i]))), shock_clear)


def shifted_sonic(ns: NonSymmetricStates, params: GasParams):
    """J-hat and arc-hat: J+- minus (+-u1 sin d tan s0, u1 sin d); arcs translated alike."""
    s = params.u1 * math.sin(ns.delta)
    t = math.tan(ns.sigma0)
    dp = np.array([s * t, s])
    dm = np.array([-s * t, s])
    arc_p, arc_m = sonic_arcs(ns)
    Jp = Point(ns.J_plus.xi - dp[0], ns.J_plus.eta - dp[1])
    Jm = Point(ns.J_minus.xi - dm[0], ns.J_minus.eta - dm[1])
    ap = replace(arc_p, center=Point(arc_p.center.xi - dp[0], arc_p.center.eta - dp[1]))
    am = replace(arc_m, center=Point(arc_m.center.xi - dm[0], arc_m.center.eta - dm[1]))
    return Jp, Jm, ap, am


# ---------------------------------------------------------------- frames

def frame_transform(obj, src: Frame, dst: Frame, config: WedgeConfig):
    """Rigid rotation about the corner between two canonical frames."""
    ang = config.angle(dst) - config.angle(src)
    dst = Frame(dst)
    if isinstance(obj, Point):
        x, y = rotate((obj.xi, obj.eta), ang)
        return Point(x, y)
    if isinstance(obj, FlowState):
        u, v = rotate((obj.u, obj.v), ang)
        return FlowState(u, v, obj.rho)
    if isinstance(obj, SonicArc):
        x, y = rotate((obj.center.xi, obj.center.eta), ang)
        return SonicArc(Point(x, y), obj.radius, obj.alpha_lo + ang, obj.alpha_hi + ang, dst)
    if isinstance(obj, ShockRay):
        x, y = rotate((obj.anchor.xi, obj.anchor.eta), ang)
        d = rotate(obj.direction, ang)
        return ShockRay(Point(x, y), d, dst)
    a = np.asarray(obj, dtype=float)
    c, s = math.cos(ang), math.sin(ang)
    R = np.array([[c, -s], [s, c]])
    return a @ R.T


def export_polylines_csv(path, curves: dict) -> None:
    """Write named polylines as rows (xi, eta, tag)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["xi", "eta", "tag"])
        for tag in sorted(curves):
            for x, y in np.asarray(curves[tag]):
                w.writerow([repr(float(x)), repr(float(y)), tag])
