"""Closed-form sigma- and delta-derivatives at the base point, checked by finite differences.

Finite differences are central, at steps h = 1e-3, 1e-4, 1e-5, combined by
Richardson extrapolation (D(h/10) * 100 - D(h)) / 99.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .gasdyn import GasParams
from .geometry import shifted_sonic, sonic_arcs
from .states import NormalReflection, nonsym_states, solve_normal, solve_regular

STEPS = (1e-3, 1e-4, 1e-5)


@dataclass
class DerivativeReport:
    name: str
    closed_form: float
    fd_value: float
    fd_step: float
    discrepancy: float
    scale: float
    band: float | None = None
    observed_order: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def richardson_central(f, x0: float = 0.0, steps=STEPS):
    """Richardson-combined central difference; returns (value, raw differences, order)."""
    D = [(f(x0 + h) - f(x0 - h)) / (2 * h) for h in steps]
    D = np.array(D, dtype=float)
    R = (100 * D[1:] - D[:-1]) / 99
    order = None
    d1, d2 = np.abs(D[0] - D[1]), np.abs(D[1] - D[2])
    if np.all(d2 > 0) and np.all(d1 > 0):
        order = float(np.min(np.log10(d1 / d2)))
    return R[0], D, order


def _report(name, cf, fd, scale, order=None, band=None):
    disc = float(np.max(np.abs(np.asarray(fd) - cf)) / max(abs(cf), scale))
    return DerivativeReport(name, float(cf), float(fd), STEPS[1], disc, float(scale), band, order)


def closed_form_sigma(params: GasParams, nr: NormalReflection) -> dict:
    zx = nr.Z / params.X
    return {"theta": zx, "b": 0.0, "rho2": 0.0, "v2": params.u1 * (zx + 1), "u2": 0.0,
            "xi_J": (zx + 1) * nr.Y, "eta_J": (zx + 1) * (params.u1 + nr.Z)}


def symmetric_derivatives(params: GasParams) -> list[DerivativeReport]:
    """d/dsigma at sigma = 0 of theta, b, rho2, v2, u2, xi_J, eta_J."""
    nr = solve_normal(params)
    cache = {}

    def field(s):
        if s not in cache:
            r = solve_regular(params, s, nr, allow_negative=True)
            cache[s] = np.array([r.theta, r.b, r.rho2, r.v2, r.u2, r.J.xi, r.J.eta])
        return cache[s]

    val, D, _ = richardson_central(field)
    cf = closed_form_sigma(params, nr)
    scales = {"theta": 1.0, "b": nr.Z, "rho2": nr.rho2bar, "v2": params.u1, "u2": params.u1,
              "xi_J": nr.Z, "eta_J": nr.Y}
    out = []
    for k, name in enumerate(cf):
        d1, d2 = abs(D[0][k] - D[1][k]), abs(D[1][k] - D[2][k])
        order = float(math.log10(d1 / d2)) if d1 > 0 and d2 > 0 else None
        out.append(_report(name, cf[name], val[k], scales[name], order))
    return out


def leading_delta(params: GasParams, nr: NormalReflection) -> dict:
    zx = nr.Z / params.X
    return {"u2_plus": 0.0, "v2_plus": params.u1 * (zx + 1), "xi_J_plus": zx * nr.Y,
            "eta_J_plus": params.u1 * (zx + 1) + nr.Z ** 2 / params.X,
            "xi_Jhat_plus": zx * nr.Y, "eta_Jhat_plus": zx * (params.u1 + nr.Z)}


def _delta_field(params, sigma0, nr):
    def field(d):
        ns = nonsym_states(params, sigma0, d, nr)
        Jh, _, _, _ = shifted_sonic(ns, params)
        return np.array([ns.plus_state.u, ns.plus_state.v, ns.J_plus.xi, ns.J_plus.eta, Jh.xi, Jh.eta])
    return field


def nonsymmetric_derivatives(params: GasParams, sigma0: float) -> list[DerivativeReport]:
    """d/ddelta at delta = 0 for fixed sigma0; the band is |FD - leading term|."""
    nr = solve_normal(params)
    steps = tuple(min(h, sigma0 / 2) for h in STEPS)
    val, D, _ = richardson_central(_delta_field(params, sigma0, nr), steps=steps)
    lead = leading_delta(params, nr)
    scales = {"u2_plus": params.u1, "v2_plus": params.u1, "xi_J_plus": nr.Z, "eta_J_plus": nr.Y,
              "xi_Jhat_plus": nr.Z, "eta_Jhat_plus": nr.Y}
    out = []
    for k, name in enumerate(lead):
        band = abs(val[k] - lead[name])
        out.append(_report(name, lead[name], val[k], scales[name], band=band))
    return out


def band_scaling(params: GasParams, sigmas=(0.04, 0.02, 0.01)) -> dict:
    """Fit band ~ K sigma0^p for each delta-derivative; the bands should be O(sigma0)."""
    sig = np.asarray(sorted(sigmas))
    bands = {}
    for s in sig:
        for r in nonsymmetric_derivatives(params, float(s)):
            bands.setdefault(r.name, []).append(r.band)
    out = {}
    for name, b in bands.items():
        b = np.asarray(b)
        if np.all(b > 0):
            p, logk = np.polyfit(np.log(sig), np.log(b), 1)
            out[name] = {"sigma0": sig.tolist(), "band": b.tolist(), "exponent": float(p),
                         "K": float(np.max(b / sig))}
        else:
            out[name] = {"sigma0": sig.tolist(), "band": b.tolist(), "exponent": None,
                         "K": float(np.max(b / sig))}
    return out


@dataclass
class SonicMotionReport:
    sigma0: float
    deltas: list
    min_vertical: list
    max_vertical: list
    leading: float
    sign_ok: bool
    arc: str = "plus"

    def as_dict(self) -> dict:
        return asdict(self)


def sonic_motion(params: GasParams, sigma0: float, delta_grid, n_alpha: int = 64,
                 h: float = 1e-6, arc_name: str = "plus") -> SonicMotionReport:
    """Vertical velocity d/ddelta of points of Gamma_sonic+ at fixed arc angle.

    A point of the arc is c2+ (cos a, sin a) + (u2+, v2+); the window of angles
    is that of the arc at the evaluation delta.  One-sided differences are used
    where delta +- h would leave [-sigma0, sigma0].  With
    ``arc_name="minus_reflected"`` the eta-mirror of Gamma_sonic- is tracked
    instead, which moves down as delta grows.
    """
    sign = 1.0 if arc_name == "plus" else -1.0
    nr = solve_normal(params)
    mins, maxs = [], []
    for d in delta_grid:
        ns = nonsym_states(params, sigma0, d, nr)
        arcs = sonic_arcs(ns)
        arc = arcs[0] if sign > 0 else arcs[1]
        al = np.linspace(arc.alpha_lo, arc.alpha_hi, n_alpha)
        lo, hi = max(d - h, -sigma0), min(d + h, sigma0)

        def pts(dd):
            n2 = nonsym_states(params, sigma0, dd, nr)
            if sign > 0:
                return n2.c2_plus * np.sin(al) + n2.plus_state.v
            return -(n2.c2_minus * np.sin(al) + n2.minus_state.v)
        vel = (pts(hi) - pts(lo)) / (hi - lo)
        mins.append(float(vel.min()))
        maxs.append(float(vel.max()))
    if sign > 0:
        pos = all(m > 0 for d, m in zip(delta_grid, mins) if d > 0)
    else:
        pos = all(m < 0 for m in maxs)
    lead = params.u1 * (nr.Z / params.X + 1)
    return SonicMotionReport(sigma0, [float(d) for d in delta_grid], mins, maxs, sign * lead, pos, arc_name)


def sonic_motion_leading(params: GasParams, sigmas=(0.04, 0.02, 0.01)) -> dict:
    """Linear extrapolation of the delta = 0 mean vertical velocity to sigma0 -> 0."""
    sig = np.asarray(sigmas, dtype=float)
    vals = []
    for s in sig:
        r = sonic_motion(params, float(s), [0.0])
        vals.append(0.5 * (r.min_vertical[0] + r.max_vertical[0]))
    slope, icpt = np.polyfit(sig, vals, 1)
    nr = solve_normal(params)
    return {"sigma0": sig.tolist(), "values": vals, "extrapolated": float(icpt),
            "leading": params.u1 * (nr.Z / params.X + 1)}


def sonic_motion_threshold(params: GasParams, sigmas=None, n_delta: int = 5) -> float | None:
    """Largest sigma0 on a geometric grid for which the arc moves up for all sampled delta in (0, sigma0]."""
    if sigmas is None:
        sigmas = np.geomspace(0.005, 0.5, 15)
    best = None
    for s in sigmas:
        try:
            r = sonic_motion(params, float(s), np.linspace(s / n_delta, s, n_delta))
        except Exception:
            break
        if not r.sign_ok:
            break
        best = float(s)
    return best
