"""Isentropic potential-flow closures in self-similar coordinates.

The pressure law is scaled so that p = rho**gamma / gamma, which gives the
sonic speed c**2 = (gamma - 1) * rho**(gamma - 1).  Every formula here is an
explicit evaluation; nothing iterates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CavitationError, DivisionDomainError, DomainError, NoAdmissibleRoot

RTOL = 1e-12


@dataclass(frozen=True)
class FlowState:
    u: float
    v: float
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("density must be positive", rho=self.rho)

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class Point:
    xi: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.eta)):
            raise DomainError("point coordinates must be finite", xi=self.xi, eta=self.eta)

    def as_array(self) -> np.ndarray:
        return np.array([self.xi, self.eta])


@dataclass(frozen=True)
class GasParams:
    """Gas constants plus the incident shock (u1, X) they determine."""

    gamma: float
    rho0: float
    rho1: float
    u1: float
    X: float

    def __post_init__(self):
        check_gamma(self.gamma)
        if not self.rho1 > self.rho0 > 0:
            raise NoAdmissibleRoot("incident shock must be compressive: rho1 > rho0 > 0",
                                   rho0=self.rho0, rho1=self.rho1)
        if not (self.u1 > 0 and self.X > self.u1):
            raise NoAdmissibleRoot("incident state needs u1 > 0 and X > u1", u1=self.u1, X=self.X)
        mass, bern = incident_residuals(self.gamma, self.rho0, self.rho1, self.u1, self.X)
        if abs(mass) > 1e-12 * self.X * self.rho1 or abs(bern) > 1e-12 * max(1.0, self.rho1 ** (self.gamma - 1)):
            raise NoAdmissibleRoot("incident-shock residuals exceed tolerance",
                                   mass=mass, bernoulli=bern)

    @classmethod
    def from_densities(cls, gamma: float, rho0: float, rho1: float) -> "GasParams":
        u1, X = incident_closed_form(gamma, rho0, rho1)
        return cls(gamma, rho0, rho1, u1, X)

    @property
    def k0(self) -> float:
        """rho0**(gamma-1), the Bernoulli constant."""
        return self.rho0 ** (self.gamma - 1)

    def sound2(self, rho):
        return (self.gamma - 1) * np.power(rho, self.gamma - 1)

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "rho0": self.rho0, "rho1": self.rho1, "u1": self.u1, "X": self.X}


def check_gamma(gamma: float) -> None:
    # every closure divides by gamma - 1; the isothermal limit is unsupported
    if not (math.isfinite(gamma) and gamma > 1):
        raise DomainError("gamma must exceed 1 (isothermal limit gamma -> 1 is unsupported)", gamma=gamma)


def incident_residuals(gamma, rho0, rho1, u1, X):
    mass = (X - u1) * rho1 - X * rho0
    bern = rho1 ** (gamma - 1) + 0.5 * u1 ** 2 - u1 * X - rho0 ** (gamma - 1)
    return mass, bern


def incident_closed_form(gamma: float, rho0: float, rho1: float) -> tuple[float, float]:
    """Speed u1 behind the incident shock and the shock speed X.

    Mass conservation gives X = rho1 u1 / (rho1 - rho0); substituting into the
    Bernoulli relation leaves u1**2 = 2 (rho1 - rho0)(rho1^(g-1) - rho0^(g-1)) / (rho1 + rho0).
    """
    check_gamma(gamma)
    if not rho1 > rho0 > 0:
        raise NoAdmissibleRoot("incident shock must be compressive: rho1 > rho0 > 0", rho0=rho0, rho1=rho1)
    dk = math.expm1((gamma - 1) * math.log(rho1 / rho0)) * rho0 ** (gamma - 1)
    u1 = math.sqrt(2.0 * (rho1 - rho0) * dk / (rho1 + rho0))
    X = rho1 * u1 / (rho1 - rho0)
    return u1, X


def bernoulli_bracket(phi, grad_phi, p, params: GasParams):
    gx, gy = grad_phi[0], grad_phi[1]
    xi, eta = _xy(p)
    return params.k0 - phi + gx * xi + gy * eta - 0.5 * (gx * gx + gy * gy)


def density_from_bernoulli(phi, grad_phi, p, params: GasParams):
    """rho = [rho0^(g-1) - phi + phi_xi xi + phi_eta eta - |grad phi|^2/2]^(1/(g-1)).

    Works elementwise on arrays.  A non-positive bracket is vacuum and raises.
    """
    br = bernoulli_bracket(phi, grad_phi, p, params)
    if np.any(~(np.asarray(br) > 0)):
        raise CavitationError("Bernoulli bracket is non-positive (vacuum)",
                              min_bracket=float(np.min(br)))
    return np.power(br, 1.0 / (params.gamma - 1))


def ellipticity_margin(grad_varphi, c2):
    """1 - |grad of pseudo-potential|^2 / c^2; positive iff the equation is elliptic."""
    if np.any(~(np.asarray(c2) > 0)):
        raise DomainError("c^2 must be positive")
    g = np.asarray(grad_varphi, dtype=float)
    return 1.0 - (g[0] ** 2 + g[1] ** 2) / c2


def quasilinear_coeffs(grad_phi, p, c2):
    """(a11, a12, a22) of the non-divergence quasilinear form."""
    if np.any(~(np.asarray(c2) > 0)):
        raise DomainError("c^2 must be positive")
    xi, eta = _xy(p)
    qx = grad_phi[0] - xi
    qy = grad_phi[1] - eta
    return c2 - qx * qx, -qx * qy, c2 - qy * qy


def rh_residual(inner: FlowState, outer: FlowState, p, normal) -> float:
    """Net pseudo-mass flux [rho+(U+ - p) - rho-(U- - p)] . n across a shock."""
    n = np.asarray(normal, dtype=float)
    if abs(np.hypot(n[0], n[1]) - 1.0) > 1e-12:
        raise DomainError("normal must be a unit vector", norm=float(np.hypot(n[0], n[1])))
    q = np.array(_xy(p), dtype=float)
    flux = inner.rho * (inner.velocity - q) - outer.rho * (outer.velocity - q)
    return float(flux @ n)


def s_function(state: FlowState, params: GasParams) -> float:
    """S = v / (u1 - u), the slope of the would-be shock normal."""
    if not state.u < params.u1:
        raise DivisionDomainError("S needs u < u1", u=state.u, u1=params.u1)
    return state.v / (params.u1 - state.u)


def phi1(p, params: GasParams):
    """Potential of the state behind the incident shock, flow along +xi."""
    xi, _ = _xy(p)
    return params.u1 * (xi - params.X)


def rh_function(phi, state, p, params: GasParams):
    """RH = [rho (u - xi, v - eta) - rho1 (u1 - xi, -eta)] . (u - u1, v).

    ``state`` supplies (u, v); the density is recomputed from Bernoulli with
    ``phi`` so the five variables (phi, u, v, xi, eta) are independent.
    Accepts arrays for vectorised evaluation.
    """
    u, v = _uv(state)
    xi, eta = _xy(p)
    rho = density_from_bernoulli(phi, (u, v), (xi, eta), params)
    fx = rho * (u - xi) - params.rho1 * (params.u1 - xi)
    fy = rho * (v - eta) - params.rho1 * (-eta)
    return fx * (u - params.u1) + fy * v


def g_function(phi, state, p, params: GasParams):
    """G = RH - (rho - rho1)(phi1 - phi)."""
    u, v = _uv(state)
    xi, eta = _xy(p)
    rho = density_from_bernoulli(phi, (u, v), (xi, eta), params)
    return rh_function(phi, state, p, params) - (rho - params.rho1) * (phi1((xi, eta), params) - phi)


def r_reduction(u, nr, params: GasParams):
    """R(u) = rho2bar Z - m(u)^(1/(g-1)) (u + Z) with m = rho2bar^(g-1) - u Z - u^2/2."""
    m = nr.rho2bar ** (params.gamma - 1) - u * nr.Z - 0.5 * u * u
    if np.any(~(np.asarray(m) > 0)):
        raise DomainError("R(u) needs m(u) > 0", u=u)
    return nr.rho2bar * nr.Z - np.power(m, 1.0 / (params.gamma - 1)) * (u + nr.Z)


def r_reduction_derivative(u, nr, params: GasParams):
    """dR/du = m^((2-g)/(g-1)) ((u+Z)^2 - (g-1) m) / (g-1)."""
    g = params.gamma
    m = nr.rho2bar ** (g - 1) - u * nr.Z - 0.5 * u * u
    if np.any(~(np.asarray(m) > 0)):
        raise DomainError("R(u) needs m(u) > 0", u=u)
    return np.power(m, (2 - g) / (g - 1)) * ((u + nr.Z) ** 2 - (g - 1) * m) / (g - 1)


def _xy(p):
    if isinstance(p, Point):
        return p.xi, p.eta
    return p[0], p[1]


def _uv(state):
    if isinstance(state, FlowState):
        return state.u, state.v
    return state[0], state[1]
