"""Uniform states of the reflection problem.

Incident shock, normal reflection (sigma = 0), regular reflection off a wedge of
half-angle complement sigma, and the rotated pair of states for a wedge whose
symmetry axis makes an angle delta with the incoming flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ContinuationBreakdown, NoAdmissibleRoot, NoIntersection
from .gasdyn import FlowState, GasParams, Point, check_gamma, incident_closed_form, incident_residuals


@dataclass(frozen=True)
class NormalReflection:
    Z: float
    rho2bar: float
    c2bar2: float
    Y: float

    @property
    def c2bar(self) -> float:
        return math.sqrt(self.c2bar2)

    def as_dict(self) -> dict:
        return {"Z": self.Z, "rho2bar": self.rho2bar, "c2bar2": self.c2bar2, "Y": self.Y}


@dataclass(frozen=True)
class RegularReflection:
    sigma: float
    theta: float
    b: float
    u2: float
    v2: float
    rho2: float
    c2: float
    J: Point
    residuals: tuple = field(default=(), compare=False)

    @property
    def state(self) -> FlowState:
        return FlowState(self.u2, self.v2, self.rho2)

    def as_dict(self) -> dict:
        return {"sigma": self.sigma, "theta": self.theta, "b": self.b, "u2": self.u2, "v2": self.v2,
                "rho2": self.rho2, "c2": self.c2, "J": [self.J.xi, self.J.eta],
                "residuals": list(self.residuals)}


@dataclass(frozen=True)
class NonSymmetricStates:
    """States behind the two reflected shocks, expressed in the symmetric-wedge frame."""

    sigma0: float
    delta: float
    plus_state: FlowState
    minus_state: FlowState
    J_plus: Point
    J_minus: Point
    rr_plus: RegularReflection
    rr_minus: RegularReflection

    @property
    def c2_plus(self) -> float:
        return self.rr_plus.c2

    @property
    def c2_minus(self) -> float:
        return self.rr_minus.c2

    def upstream_state(self, params: GasParams) -> FlowState:
        return FlowState(params.u1 * math.cos(self.delta), params.u1 * math.sin(self.delta), params.rho1)

    def as_dict(self) -> dict:
        s = lambda st: {"u": st.u, "v": st.v, "rho": st.rho}
        return {"sigma0": self.sigma0, "delta": self.delta,
                "plus_state": s(self.plus_state), "minus_state": s(self.minus_state),
                "c2_plus": self.c2_plus, "c2_minus": self.c2_minus,
                "J_plus": [self.J_plus.xi, self.J_plus.eta], "J_minus": [self.J_minus.xi, self.J_minus.eta]}


@dataclass(frozen=True)
class StatePotential:
    """phi(xi, eta) = a xi + b eta + c for a uniform state."""

    a: float
    b: float
    c: float

    def __call__(self, xi, eta):
        return self.a * xi + self.b * eta + self.c

    def pseudo(self, xi, eta):
        return self(xi, eta) - 0.5 * (np.square(xi) + np.square(eta))

    @property
    def grad(self) -> np.ndarray:
        return np.array([self.a, self.b])

    def shifted(self, s) -> "StatePotential":
        """Same function written in x = p - s coordinates."""
        return StatePotential(self.a, self.b, self.c + self.a * s[0] + self.b * s[1])

    def mirrored(self) -> "StatePotential":
        return StatePotential(self.a, -self.b, self.c)


# ---------------------------------------------------------------- incident

def solve_incident(gamma: float, rho0: float, rho1: float) -> tuple[float, float]:
    """Return (u1, X) for the incident shock; residuals checked to 1e-12."""
    u1, X = incident_closed_form(gamma, rho0, rho1)
    mass, bern = incident_residuals(gamma, rho0, rho1, u1, X)
    if abs(mass) > 1e-12 * X * rho1 or abs(bern) > 1e-12 * max(1.0, rho1 ** (gamma - 1)):
        raise NoAdmissibleRoot("incident residuals exceed tolerance", mass=mass, bernoulli=bern)
    return u1, X


def gas_params(gamma: float, rho0: float, rho1: float) -> GasParams:
    u1, X = solve_incident(gamma, rho0, rho1)
    return GasParams(gamma, rho0, rho1, u1, X)


def worked_case() -> GasParams:
    """gamma = 2, rho0 = 1, rho1 = 2: every quantity has a closed form."""
    return gas_params(2.0, 1.0, 2.0)


# ---------------------------------------------------------------- normal reflection

def _normal_rho(Z, params):
    br = params.k0 + params.u1 * (Z + params.X)
    return br ** (1.0 / (params.gamma - 1))


def _normal_residual(Z, params):
    return _normal_rho(Z, params) * Z - params.rho1 * (Z + params.u1)


def normal_residuals(nr: NormalReflection, params: GasParams) -> tuple[float, float]:
    r19 = params.rho1 * (nr.Z + params.u1) - nr.rho2bar * nr.Z
    r20 = params.k0 + params.u1 * (nr.Z + params.X) - nr.rho2bar ** (params.gamma - 1)
    return r19 / (nr.rho2bar * nr.Z), r20 / nr.rho2bar ** (params.gamma - 1)


def solve_normal(params: GasParams, n_scan: int = 1024) -> NormalReflection:
    """Reflection off a wall parallel to the flow.

    Z is bracketed by a sign-change scan over 1024 log-spaced nodes on
    (0, u1 + X], so the admissible branch is selected and its uniqueness on
    that range is checked, then refined with Brent's method.
    """
    hi = params.u1 + params.X
    zs = np.geomspace(hi * 1e-9, hi, n_scan)
    f = np.array([_normal_residual(z, params) for z in zs])
    changes = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
    if len(changes) == 0:
        raise NoAdmissibleRoot("no sign change of the normal-reflection residual on (0, u1+X]",
                               **params.as_dict())
    if len(changes) > 1:
        raise NoAdmissibleRoot("normal-reflection root is not unique", n_roots=len(changes))
    i = changes[0]
    Z = brentq(_normal_residual, zs[i], zs[i + 1], args=(params,), xtol=1e-15, rtol=1e-15, maxiter=200)
    rho2 = _normal_rho(Z, params)
    c2 = (params.gamma - 1) * rho2 ** (params.gamma - 1)
    if not (Z > 0 and rho2 > params.rho1):
        raise NoAdmissibleRoot("normal-reflection root is not admissible", Z=Z, rho2bar=rho2)
    if not Z * Z < c2:
        raise NoAdmissibleRoot("reflected shock misses the sonic circle (Z^2 >= c^2)", Z=Z, c2bar2=c2)
    return NormalReflection(Z, rho2, c2, math.sqrt(c2 - Z * Z))


# ---------------------------------------------------------------- regular reflection

def regular_residuals(x, sigma, params: GasParams) -> np.ndarray:
    """Bernoulli at (-b, 0), mass flux, slip and shock-line geometry residuals."""
    v2, rho2, b, th = x
    g, u1, X, r1 = params.gamma, params.u1, params.X, params.rho1
    t = math.tan(sigma)
    f1 = rho2 ** (g - 1) + 0.5 * (t * t + 1) * v2 * v2 + v2 * b * t - r1 ** (g - 1) - 0.5 * u1 * u1 - u1 * b
    f2 = (r1 * (u1 + b) - rho2 * (v2 * t + b)) * (u1 - v2 * t) + rho2 * v2 * v2
    f3 = v2 * math.cos(th) / math.cos(sigma) - u1 * math.sin(sigma + th)
    f4 = X * math.tan(th + sigma) - t * (b + X)
    return np.array([f1, f2, f3, f4])


def _regular_scales(params, nr):
    k = params.rho1 ** (params.gamma - 1) + params.u1 ** 2 + params.u1 * nr.Z
    return np.array([k, params.rho1 * params.u1 * (params.u1 + nr.Z), params.u1, params.X])


def _regular_jacobian(x, sigma, params):
    v2, rho2, b, th = x
    g, u1, X, r1 = params.gamma, params.u1, params.X, params.rho1
    t = math.tan(sigma)
    cs = math.cos(sigma)
    A = r1 * (u1 + b) - rho2 * (v2 * t + b)
    B = u1 - v2 * t
    J = np.zeros((4, 4))
    J[0] = [(t * t + 1) * v2 + b * t, (g - 1) * rho2 ** (g - 2), v2 * t - u1, 0.0]
    J[1] = [-rho2 * t * B - A * t + 2 * rho2 * v2, -(v2 * t + b) * B + v2 * v2, (r1 - rho2) * B, 0.0]
    J[2] = [math.cos(th) / cs, 0.0, 0.0, -v2 * math.sin(th) / cs - u1 * math.cos(sigma + th)]
    J[3] = [0.0, 0.0, -t, X / math.cos(th + sigma) ** 2]
    return J


def _newton(x0, sigma, params, scales, tol=1e-13, maxit=40):
    x = np.array(x0, dtype=float)
    for _ in range(maxit):
        F = regular_residuals(x, sigma, params)
        if np.max(np.abs(F) / scales) < tol:
            return x, F
        J = _regular_jacobian(x, sigma, params)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None, None
        if not np.all(np.isfinite(dx)):
            return None, None
        x = x + dx
        if x[1] <= 0:
            return None, None
    F = regular_residuals(x, sigma, params)
    if np.max(np.abs(F) / scales) < 1e-11:
        return x, F
    return None, None


def solve_regular(params: GasParams, sigma: float, nr: NormalReflection | None = None,
                  max_step: float = 0.02, allow_negative: bool = False) -> RegularReflection:
    """Regular reflection state at wedge angle ``sigma`` by continuation from sigma = 0.

    ``allow_negative`` permits sigma < 0 (the mirror configuration); it is used
    by the finite-difference checks that need central differences at sigma = 0.
    """
    if nr is None:
        nr = solve_normal(params)
    if not math.isfinite(sigma) or (sigma < 0 and not allow_negative) or abs(sigma) >= math.pi / 2:
        raise ContinuationBreakdown("sigma outside [0, pi/2)", sigma=sigma, last_good_sigma=0.0)
    scales = _regular_scales(params, nr)
    x = np.array([0.0, nr.rho2bar, nr.Z, 0.0])
    x_prev, s_prev = None, 0.0
    s = 0.0
    h = math.copysign(min(abs(sigma), max_step), sigma) if sigma != 0 else 0.0
    F = regular_residuals(x, 0.0, params)
    while s != sigma:
        s_next = s + h
        if (h > 0 and s_next > sigma) or (h < 0 and s_next < sigma) or abs(sigma - s_next) < 1e-15:
            s_next = sigma
        guess = x if x_prev is None else x + (x - x_prev) * (s_next - s) / (s - s_prev)
        xn, Fn = _newton(guess, s_next, params, scales)
        ok = xn is not None and xn[1] > params.rho1 and (xn[3] * np.sign(s_next) >= -1e-14)
        if not ok:
            h *= 0.5
            if abs(h) < 1e-9:
                raise ContinuationBreakdown("Newton stalled in sigma-continuation",
                                            sigma=sigma, last_good_sigma=s)
            continue
        x_prev, s_prev = x, s
        x, s, F = xn, s_next, Fn
    v2, rho2, b, th = x
    u2 = v2 * math.tan(sigma)
    c2 = math.sqrt((params.gamma - 1) * rho2 ** (params.gamma - 1))
    J = sonic_point(u2, v2, rho2, params)
    return RegularReflection(sigma, th, b, u2, v2, rho2, c2, J, tuple(float(f) for f in F / scales))


def find_sigma_max(params: GasParams, start: float = 0.05, hi: float = 1.5, tol: float = 1e-4) -> float:
    """Largest sigma reached by continuation (bisection on solvability)."""
    nr = solve_normal(params)
    lo = 0.0
    s = start
    while s < hi:
        try:
            solve_regular(params, s, nr)
            lo = s
            s = min(hi, s * 1.5)
        except (ContinuationBreakdown, NoIntersection):
            break
    else:
        return lo
    up = s
    while up - lo > tol:
        mid = 0.5 * (lo + up)
        try:
            solve_regular(params, mid, nr)
            lo = mid
        except (ContinuationBreakdown, NoIntersection):
            up = mid
    return lo


# ---------------------------------------------------------------- sonic point

def sonic_line(u2, v2, rho2, params: GasParams) -> tuple[float, float, float]:
    """Coefficients (A, B, C) of the line phi1 = phi2: A xi + B eta + C = 0 (flow frame)."""
    g, u1 = params.gamma, params.u1
    A = u2 - u1
    B = v2
    C = 0.5 * u1 * u1 - 0.5 * (u2 * u2 + v2 * v2) + params.rho1 ** (g - 1) - rho2 ** (g - 1)
    return A, B, C


def sonic_point(u2, v2, rho2, params: GasParams, radius2: float | None = None) -> Point:
    """Upper intersection of the sonic circle of state 2 with the line phi1 = phi2."""
    if radius2 is None:
        radius2 = (params.gamma - 1) * rho2 ** (params.gamma - 1)
    A, B, C = sonic_line(u2, v2, rho2, params)
    nn = math.hypot(A, B)
    d = (A * u2 + B * v2 + C) / nn
    disc = radius2 - d * d
    if not disc > 0:
        raise NoIntersection("sonic circle does not meet the reflected-shock line",
                             discriminant=disc)
    fx, fy = u2 - d * A / nn, v2 - d * B / nn
    h = math.sqrt(disc)
    tx, ty = -B / nn, A / nn
    p1 = (fx + h * tx, fy + h * ty)
    p2 = (fx - h * tx, fy - h * ty)
    q = p1 if p1[1] >= p2[1] else p2
    return Point(float(q[0]), float(q[1]))


# ---------------------------------------------------------------- rotations

def rotate(vec, angle):
    """Counter-clockwise rotation; equals the row-vector product with [[c, s], [-s, c]]."""
    c, s = math.cos(angle), math.sin(angle)
    x, y = vec
    return (c * x - s * y, s * x + c * y)


def nonsym_states(params: GasParams, sigma0: float, delta: float,
                  nr: NormalReflection | None = None) -> NonSymmetricStates:
    """Pair of states for the wedge of half-angle complement sigma0 and flow angle delta.

    In the frame where the wedge is symmetric about the xi-axis the upstream
    flow is u1 (cos delta, sin delta).  The plus state is the symmetric
    solution at sigma0 + delta rotated by delta; the minus state is the
    symmetric solution at sigma0 - delta rotated by -delta and mirrored.
    """
    if not abs(delta) <= sigma0 + 1e-15:
        raise ContinuationBreakdown("|delta| must not exceed sigma0", sigma=sigma0, delta=delta,
                                    last_good_sigma=0.0)
    if nr is None:
        nr = solve_normal(params)
    sp = max(sigma0 + delta, 0.0)
    sm = max(sigma0 - delta, 0.0)
    rp = solve_regular(params, sp, nr)
    rm = solve_regular(params, sm, nr)
    up, vp = rotate((rp.u2, rp.v2), delta)
    Jp = rotate((rp.J.xi, rp.J.eta), delta)
    um, vm = rotate((rm.u2, rm.v2), -delta)
    Jm = rotate((rm.J.xi, rm.J.eta), -delta)
    return NonSymmetricStates(
        sigma0, delta,
        FlowState(float(up), float(vp), rp.rho2), FlowState(float(um), float(-vm), rm.rho2),
        Point(float(Jp[0]), float(Jp[1])), Point(float(Jm[0]), float(-Jm[1])), rp, rm)


# ---------------------------------------------------------------- potentials

def state_potential(state: FlowState, params: GasParams) -> StatePotential:
    """Affine potential of a uniform state, from inverting the Bernoulli closure."""
    c = -state.rho ** (params.gamma - 1) + params.k0 - 0.5 * (state.u ** 2 + state.v ** 2)
    return StatePotential(state.u, state.v, c)


@dataclass(frozen=True)
class ShiftedPotentials:
    """Potentials after subtracting the linear shift s . p.

    ``shift`` is s = (u1 sin(delta) tan(sigma), u1 sin(delta)).  The plain family
    lives in x = p - s, the hatted (mirrored) family in x = p + s; both are
    returned as affine functions of x so they can be compared pointwise.
    """

    sigma: float
    delta: float
    K: float
    shift: tuple
    psi1: StatePotential
    psi2: StatePotential
    psi_hat1: StatePotential
    psi_hat2: StatePotential

    def psi(self, phi_fn):
        """psi(xi, eta) = phi - s . p for an arbitrary potential function."""
        sx, sy = self.shift
        return lambda xi, eta: phi_fn(xi, eta) - sx * xi - sy * eta


def shifted_potentials(params: GasParams, sigma: float, delta: float,
                       ns: NonSymmetricStates | None = None) -> ShiftedPotentials:
    u1 = params.u1
    sx, sy = u1 * math.sin(delta) * math.tan(sigma), u1 * math.sin(delta)
    K = params.k0 - u1 * u1 * math.sin(delta) ** 2 / (2 * math.cos(sigma) ** 2)
    if ns is None:
        ns = nonsym_states(params, sigma, delta)
    phi1 = state_potential(ns.upstream_state(params), params)
    phi2p = state_potential(ns.plus_state, params)
    phi2m = state_potential(ns.minus_state, params)

    def plain(pot):
        # psi(x) = phi(x + s) - s.(x + s)
        a, b = pot.a - sx, pot.b - sy
        return StatePotential(a, b, pot.c + pot.a * sx + pot.b * sy - sx * sx - sy * sy)

    def hatted(pot):
        m = pot.mirrored()
        # psi_hat(x) = phi~(x - s) + s.(x - s)
        return StatePotential(m.a + sx, m.b + sy, m.c - m.a * sx - m.b * sy - sx * sx - sy * sy)

    return ShiftedPotentials(sigma, delta, K, (sx, sy), plain(phi1), plain(phi2p), hatted(phi1), hatted(phi2m))


def psi1_closed_form(params: GasParams, sigma: float, delta: float):
    """K - rho1^(g-1) + u1 (cos d - sin d tan s) x - u1^2 (cos d - sin d tan s)^2 / 2, as (slope, const)."""
    K = params.k0 - params.u1 ** 2 * math.sin(delta) ** 2 / (2 * math.cos(sigma) ** 2)
    w = math.cos(delta) - math.sin(delta) * math.tan(sigma)
    return params.u1 * w, K - params.rho1 ** (params.gamma - 1) - 0.5 * params.u1 ** 2 * w * w


def psi_hat1_closed_form(params: GasParams, sigma: float, delta: float):
    K = params.k0 - params.u1 ** 2 * math.sin(delta) ** 2 / (2 * math.cos(sigma) ** 2)
    w = math.cos(delta) + math.sin(delta) * math.tan(sigma)
    return params.u1 * w, K - params.rho1 ** (params.gamma - 1) - 0.5 * params.u1 ** 2 * w * w
