"""Explicit constants and barrier functions for equations with singular coefficients.

"Verification" here means evaluating the pointwise differential inequality of
each barrier with every coefficient replaced by its sign-worst admissible
value, on a dense grid, and reporting a witness wherever it fails.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ParameterInfeasible, SearchFailure

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SingularCoeffBounds:
    """lam <= (a_ij) <= Lam, |b| <= C_E r^(alpha-1) on a cone of angle pi/2 + sigma."""

    lam: float
    Lam: float
    C_E: float
    alpha: float
    r0: float
    sigma: float = 0.0

    def __post_init__(self):
        if not 0 < self.lam <= self.Lam:
            raise DomainError("need 0 < lambda <= Lambda", lam=self.lam, Lam=self.Lam)
        if not 0 < self.alpha < 1:
            raise DomainError("need 0 < alpha < 1", alpha=self.alpha)
        if not self.C_E >= 0:
            raise DomainError("need C_E >= 0", C_E=self.C_E)
        if not self.r0 > 0:
            raise DomainError("need r0 > 0", r0=self.r0)

    @property
    def A(self) -> float:
        return math.pi / 2 + self.sigma


class BarrierKind(str, enum.Enum):
    A2_EXP = "A2_EXP"
    A3_LOG = "A3_LOG"
    KS_QUADRATIC = "KS_QUADRATIC"


@dataclass
class Verdict:
    ok: bool
    checks: dict
    witness: dict | None = None
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- corner-cone radius

def eps_A1_detail(b: SingularCoeffBounds) -> tuple[float, bool]:
    """min{ sqrt(a)/(8 C_E sqrt(pi)) (exp(4(1 + pi C_E^2/a)/(pi lam^2)) - 1)^(-1/2), e^-4 }.

    Returns (value, overflow_flag); the flag is set when the first branch
    underflows to zero in double precision.
    """
    cap = math.exp(-4.0)
    if b.C_E == 0:
        return cap, False
    E = 4.0 * (1.0 + math.pi * b.C_E ** 2 / b.alpha) / (math.pi * b.lam ** 2)
    pre = math.sqrt(b.alpha) / (8.0 * b.C_E * math.sqrt(math.pi))
    if E < 700:
        first = pre / math.sqrt(math.expm1(E))
    else:
        # (e^E - 1)^(-1/2) = e^(-E/2) (1 - e^-E)^(-1/2)
        logv = math.log(pre) - 0.5 * E
        first = math.exp(logv) if logv > -745 else 0.0
    if first == 0.0:
        return 0.0, True
    return min(first, cap), False


def eps_A1(b: SingularCoeffBounds) -> float:
    return eps_A1_detail(b)[0]


# ---------------------------------------------------------------- conformal map and exponential barrier

def conformal_coeffs(a, bvec, r, ang, Theta: float, A: float):
    """Coefficients after the map z -> z^(Theta/A) of the cone of angle A onto angle Theta.

    ``a`` has shape (N, 2, 2), ``bvec`` (N, 3) holding (b1, b2, b3), ``r`` and
    ``ang`` the polar coordinates of the original sample points.
    Returns (a_tilde (N, 2, 2), b_tilde (N, 3)).
    """
    a = np.asarray(a, dtype=float)
    bvec = np.asarray(bvec, dtype=float)
    r = np.asarray(r, dtype=float)
    ang = np.asarray(ang, dtype=float)
    k = Theta / A
    c1, s1 = np.cos(ang * (k - 1)), np.sin(ang * (k - 1))
    c2, s2 = np.cos(ang * (k - 2)), np.sin(ang * (k - 2))
    P = np.empty(a.shape)
    P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1] = c1, s1, -s1, c1
    at = k * k * np.einsum("nji,njk,nkl->nil", P, a, P)
    a11, a12, a22 = a[:, 0, 0], a[:, 0, 1], a[:, 1, 1]
    b1, b2, b3 = bvec[:, 0], bvec[:, 1], bvec[:, 2]
    sing = k * (k - 1) * np.power(r, -k)
    reg = k * np.power(r, 1 - k)
    bt = np.empty(bvec.shape)
    bt[:, 0] = sing * (c2 * a11 - 2 * s2 * a12 - c2 * a22) + reg * (b1 * c1 - b2 * s1)
    bt[:, 1] = sing * (s2 * a11 + 2 * c2 * a12 - s2 * a22) + reg * (b1 * s1 + b2 * c1)
    bt[:, 2] = b3 * np.power(r, 2 - 2 * k)
    return at, bt


def random_admissible_coeffs(b: SingularCoeffBounds, n: int, rng: np.random.Generator,
                             near_identity: bool = True):
    """Random samples (a, bvec, r, ang) inside the admissible class.

    With ``near_identity`` the matrix eigenvalues are 1 + O(C_E r^alpha) clipped
    to [lam, Lam] (the regime in which b_tilde stays bounded); otherwise they
    are uniform in [lam, Lam].
    """
    r = b.r0 * rng.uniform(1e-6, 1.0, n) ** 2
    ang = rng.uniform(0.0, b.A, n)
    rot = rng.uniform(0.0, math.pi, n)
    if near_identity:
        dev = b.C_E * np.power(r, b.alpha) / 2
        ev = 1.0 + dev[:, None] * rng.uniform(-1.0, 1.0, (n, 2))
        ev = np.clip(ev, b.lam, b.Lam)
    else:
        ev = rng.uniform(b.lam, b.Lam, (n, 2))
    c, s = np.cos(rot), np.sin(rot)
    Q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    a = np.einsum("nij,nj,nkj->nik", Q, ev, Q)
    bmag = b.C_E * np.power(r, b.alpha - 1) * rng.uniform(0.0, 1.0, n)
    bdir = rng.uniform(0.0, 2 * math.pi, n)
    bvec = np.stack([bmag * np.cos(bdir) / math.sqrt(2), bmag * np.sin(bdir) / math.sqrt(2),
                     b.C_E * np.power(r, b.alpha - 1) * rng.uniform(-1.0, 1.0, n)], -1)
    return a, bvec, r, ang


def check_conformal_bounds(b: SingularCoeffBounds, n: int = 10_000, seed: int = 0) -> Verdict:
    """Eigenvalues of a_tilde in [lam alpha^2/4, Lam alpha^2/4] on random fields; max |b_tilde| reported."""
    rng = np.random.default_rng(seed)
    Theta = b.alpha * b.A / 2
    a, bvec, r, ang = random_admissible_coeffs(b, n, rng, near_identity=False)
    at, _ = conformal_coeffs(a, bvec, r, ang, Theta, b.A)
    ev = np.linalg.eigvalsh(at)
    lo, hi = b.lam * b.alpha ** 2 / 4, b.Lam * b.alpha ** 2 / 4
    tol = 1e-12 * hi
    bad = np.nonzero((ev[:, 0] < lo - tol) | (ev[:, 1] > hi + tol))[0]
    a2, bvec2, r2, ang2 = random_admissible_coeffs(b, n, rng, near_identity=True)
    _, bt = conformal_coeffs(a2, bvec2, r2, ang2, Theta, b.A)
    witness = None
    if len(bad):
        i = int(bad[0])
        witness = {"r": float(r[i]), "angle": float(ang[i]), "eigenvalues": ev[i].tolist()}
    return Verdict(len(bad) == 0,
                   {"eig_min": float(ev[:, 0].min()), "eig_max": float(ev[:, 1].max()),
                    "bound_lo": lo, "bound_hi": hi, "n_samples": n,
                    "b_tilde_max": [float(v) for v in np.abs(bt).max(axis=0)]},
                   witness, {"Theta": Theta, "A": b.A, "seed": seed})


def a2_gamma_threshold(lam: float, Lam: float, C: float) -> float:
    """Positive root of -4 lam g^2 + 4 (Lam + C) g + 1 = 0."""
    s = Lam + C
    return (s + math.sqrt(s * s + lam)) / (2 * lam)


def eps_A2(gamma: float, C: float) -> float:
    return math.inf if C == 0 else math.exp(-9 * gamma) / (12 * gamma * C)


def a2_feasible_gamma(lam: float, Lam: float, C: float, r0: float) -> float:
    """A gamma with the quadratic condition strict and r0 <= eps_A2(gamma)."""
    g_lo = a2_gamma_threshold(lam, Lam, C)
    if C == 0:
        return 1.25 * g_lo
    # eps_A2 decreases in gamma; find the largest gamma it allows
    if eps_A2(g_lo, C) < r0:
        hi = g_lo
        lo = 1e-12
        gap_hi = None
        # largest g with eps_A2(g) >= r0 lies below g_lo: report the gap
        f = lambda g: eps_A2(g, C) - r0
        if f(lo) < 0:
            gap_hi = 0.0
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if f(mid) >= 0 else (lo, mid)
            gap_hi = lo
        raise ParameterInfeasible("quadratic threshold exceeds the gamma allowed by r0",
                                  gamma_threshold=g_lo, gamma_allowed=gap_hi, root_gap=g_lo - gap_hi)
    lo, hi = g_lo, 2 * g_lo + 10
    while eps_A2(hi, C) >= r0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if eps_A2(mid, C) >= r0 else (lo, mid)
    return g_lo + 0.5 * (lo - g_lo)


def a2_barrier(xi, eta, t: float, gamma: float, M: float):
    """w^t = M [1 - exp(-gamma q)], q = (xi - t)^2 + (eta + 1)^2 - 1, with gradient and Hessian."""
    dx, dy = xi - t, eta + 1.0
    q = dx * dx + dy * dy - 1.0
    E = np.exp(-gamma * q)
    w = M * (1.0 - E)
    gx, gy = 2 * M * gamma * E * dx, 2 * M * gamma * E * dy
    hxx = M * E * (2 * gamma - 4 * gamma ** 2 * dx * dx)
    hyy = M * E * (2 * gamma - 4 * gamma ** 2 * dy * dy)
    hxy = -4 * M * gamma ** 2 * E * dx * dy
    return w, (gx, gy), (hxx, hxy, hyy)


def _worst_trace(lo, hi, hxx, hxy, hyy, maximize: bool):
    """max (or min) of tr(a H) over lo <= a <= hi: attained with a sharing H's eigenvectors."""
    m = 0.5 * (hxx + hyy)
    d = np.sqrt(0.25 * (hxx - hyy) ** 2 + hxy ** 2)
    out = 0.0
    for mu in (m + d, m - d):
        if maximize:
            out = out + np.maximum(lo * mu, hi * mu)
        else:
            out = out + np.minimum(lo * mu, hi * mu)
    return out


def verify_A2_barrier(lam: float, Lam: float, C: float, C3: float, rho0: float, Theta: float,
                      t: float, gamma_exp: float, M: float | None = None, n: int = 200) -> Verdict:
    """Supersolution check for w^t on the sector {0 <= theta <= Theta, rho <= rho0}.

    ``lam``, ``Lam`` bound the transformed principal coefficients, ``C`` bounds
    |b_tilde_1|, |b_tilde_2| and ``C3`` bounds |b_tilde_3|.
    """
    if not 0 < t < rho0 / 2:
        raise DomainError("need 0 < t < rho0/2", t=t, rho0=rho0)
    qmin_arc = (rho0 - t) ** 2
    if M is None:
        M = (1 + 1e-9) / -math.expm1(-gamma_exp * qmin_arc)
    rho = np.geomspace(rho0 * 1e-6, rho0, n)
    th = np.linspace(0.0, Theta, n)
    R, T = np.meshgrid(rho, th, indexing="ij")
    X, Y = R * np.cos(T), R * np.sin(T)
    w, (gx, gy), (hxx, hxy, hyy) = a2_barrier(X, Y, t, gamma_exp, M)
    expr = (_worst_trace(lam, Lam, hxx, hxy, hyy, True) + C * (np.abs(gx) + np.abs(gy)) + C3 * np.abs(w))
    scale = M * np.exp(-gamma_exp * ((X - t) ** 2 + (Y + 1) ** 2 - 1))
    rel = expr / scale
    i = np.unravel_index(int(np.argmax(rel)), rel.shape)
    interior_ok = bool(rel[i] <= 0)
    # oblique boundary theta = Theta: outward normal (-sin, cos)
    s = rho
    wb, (bx, by), _ = a2_barrier(s * math.cos(Theta), s * math.sin(Theta), t, gamma_exp, M)
    dn = -math.sin(Theta) * bx + math.cos(Theta) * by
    ray_ok = bool(np.all(dn >= 0))
    wa, _, _ = a2_barrier(rho0 * np.cos(th), rho0 * np.sin(th), t, gamma_exp, M)
    arc_ok = bool(np.all(wa >= 1.0))
    quad = -4 * gamma_exp ** 2 * lam + 4 * Lam * gamma_exp + 4 * C * gamma_exp + 1
    witness = None
    if not interior_ok:
        witness = {"xi": float(X[i]), "eta": float(Y[i]), "normalised_value": float(rel[i])}
    elif not ray_ok:
        j = int(np.argmin(dn))
        witness = {"xi": float(s[j] * math.cos(Theta)), "eta": float(s[j] * math.sin(Theta)),
                   "normal_derivative": float(dn[j])}
    elif not arc_ok:
        j = int(np.argmin(wa))
        witness = {"xi": float(rho0 * math.cos(th[j])), "eta": float(rho0 * math.sin(th[j])), "w": float(wa[j])}
    checks = {"interior_max_normalised": float(rel[i]), "interior_ok": interior_ok, "ray_ok": ray_ok,
              "arc_ok": arc_ok, "quadratic_condition": quad,
              "gamma_threshold": a2_gamma_threshold(lam, Lam, C), "eps_A2": eps_A2(gamma_exp, C)}
    return Verdict(interior_ok and ray_ok and arc_ok, checks, witness,
                   {"gamma": gamma_exp, "M": M, "t": t, "rho0": rho0, "Theta": Theta, "grid": n})


# ---------------------------------------------------------------- log barrier

def golden_max(f, a: float, b: float, tol: float = 1e-12, maxit: int = 500) -> tuple[float, float]:
    """Maximiser of a unimodal f on [a, b] by golden-section search, endpoints included."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(maxit):
        if b - a < tol * max(1.0, abs(a) + abs(b)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    xm = 0.5 * (a + b)
    cands = [(f(xm), xm), (f1, x1), (f2, x2)]
    return max(cands)[1], max(cands)[0]


def _sup_log(f, r0: float, depth: float = 80.0):
    """sup of f(y) over 0 < y < r0, searched in s = log y."""
    if not 0 < r0 < 1:
        raise SearchFailure("need 0 < r0 < 1 so that -log y > 0", r0=r0)
    lo, hi = math.log(r0) - depth, math.log(r0)
    g = lambda s: f(math.exp(s))
    s_star, val = golden_max(g, lo, hi)
    end = g(hi)
    if s_star - lo < 1e-6 * depth or not math.isfinite(val):
        raise SearchFailure("supremum not bracketed in (0, r0)", s=s_star)
    if end >= val:
        return math.exp(hi), end
    return math.exp(s_star), val


@dataclass
class A3Constants:
    C1: float
    C2: float
    gamma: float
    mu: float
    eps_A3: float
    eps_A3_alt: float
    y_C1: float
    y_C2: float
    y_mu: float

    def as_dict(self):
        return asdict(self)


def a3_constants(b: SingularCoeffBounds) -> A3Constants:
    """gamma = max(C1, C2) + 1 and mu; eps_A3 = min(r0^2 mu/4, r0/2), alt uses r0/4."""
    CE, al, lam = b.C_E, b.alpha, b.lam
    y1, s1 = _sup_log(lambda y: 2 * CE * y ** al * (-math.log(y)), b.r0)
    y2, s2 = _sup_log(lambda y: CE * (y ** al + y ** (al + 1)) * math.log(y) ** 2, b.r0)
    C1, C2 = s1 / lam, s2 / lam
    gamma = max(C1, C2) + 1
    ym, smax = _sup_log(lambda y: y * (-math.log(y)) ** (gamma + 1), b.r0)
    mu = lam * gamma / smax / (2 * b.Lam + 3 * CE + 1)
    return A3Constants(C1, C2, gamma, mu, min(b.r0 ** 2 * mu / 4, b.r0 / 2),
                       min(b.r0 ** 2 * mu / 4, b.r0 / 4), y1, y2, ym)


def a3_barrier(x, y, gamma: float, mu: float):
    """w = y / (-log y)^gamma - mu x^2 with its gradient and diagonal Hessian."""
    L = -np.log(y)
    w = y / L ** gamma - mu * x * x
    wy = L ** -gamma + gamma * L ** (-gamma - 1)
    wyy = gamma / (y * L ** (gamma + 1)) + gamma * (gamma + 1) / (y * L ** (gamma + 2))
    return w, (-2 * mu * x, wy), (-2 * mu * np.ones_like(y), np.zeros_like(y), wyy)


def a3_expression(x, y, a, bvec, gamma, mu):
    """a_ij w_ij + b1 w_x + b2 w_y + b3 w for given coefficients (arrays broadcast)."""
    w, (gx, gy), (hxx, hxy, hyy) = a3_barrier(x, y, gamma, mu)
    return (a[..., 0, 0] * hxx + 2 * a[..., 0, 1] * hxy + a[..., 1, 1] * hyy
            + bvec[..., 0] * gx + bvec[..., 1] * gy + bvec[..., 2] * w)


def a3_worst(x, y, b: SingularCoeffBounds, gamma, mu):
    """Lower bound of the expression over all admissible coefficients at (x, y)."""
    w, (gx, gy), (hxx, hxy, hyy) = a3_barrier(x, y, gamma, mu)
    r = np.hypot(x, y)
    bb = b.C_E * r ** (b.alpha - 1)
    return (_worst_trace(b.lam, b.Lam, hxx, hxy, hyy, False)
            - bb * np.hypot(gx, gy) - bb * np.abs(w))


def a3_proof_bound(y, b: SingularCoeffBounds, gamma, mu):
    """Analytic lower bound of the barrier operator (after r^(alpha-1) <= y^(alpha-1), |x| <= r0)."""
    L = -np.log(y)
    CE, al = b.C_E, b.alpha
    return (b.lam * gamma / (y * L ** (gamma + 1)) - 2 * b.Lam * mu - 2 * CE * b.r0 ** al * mu
            - CE * mu * b.r0 ** (al + 1)
            + (b.lam * gamma * (gamma + 1) - CE * y ** al * L ** 2 - CE * gamma * y ** al * L
               - CE * y ** (al + 1) * L ** 2) / (y * L ** (gamma + 2)))


def verify_A3(b: SingularCoeffBounds, gamma: float, mu: float, eps: float, n: int = 200) -> Verdict:
    """Subsolution and boundary checks for w on the cone {0 < angle < pi/2 + sigma} in B_r0.

    Components: worst-case interior inequality on a log-polar grid; w <= y - eps
    on the arc; w_n <= 0 on the slanted side; and the proof's step
    (-log r0)^(-gamma) <= 1/4 used to bound w on the arc.
    """
    r = np.geomspace(b.r0 * 1e-8, b.r0 * (1 - 1e-9), n)
    th = np.linspace(0.0, b.A, n + 2)[1:-1]
    R, T = np.meshgrid(r, th, indexing="ij")
    X, Y = R * np.cos(T), R * np.sin(T)
    worst = a3_worst(X, Y, b, gamma, mu)
    i = np.unravel_index(int(np.argmin(worst)), worst.shape)
    interior_ok = bool(worst[i] >= 0)
    proof = a3_proof_bound(Y, b, gamma, mu)
    # arc r = r0
    ax, ay = b.r0 * np.cos(th), b.r0 * np.sin(th)
    wa, _, _ = a3_barrier(ax, ay, gamma, mu)
    slack = ay - eps - wa
    arc_ok = bool(np.all(slack >= 0))
    # slanted side angle A, outward normal (-sin A, cos A)
    sx, sy = r * math.cos(b.A), r * math.sin(b.A)
    _, (gx, gy), _ = a3_barrier(sx, sy, gamma, mu)
    wn = -math.sin(b.A) * gx + math.cos(b.A) * gy
    side_ok = bool(np.all(wn <= 1e-15))
    step = (-math.log(b.r0)) ** -gamma
    step_ok = step <= 0.25
    witness = None
    if not interior_ok:
        witness = {"kind": "interior", "x": float(X[i]), "y": float(Y[i]), "value": float(worst[i])}
    elif not arc_ok:
        j = int(np.argmin(slack))
        witness = {"kind": "arc", "x": float(ax[j]), "y": float(ay[j]), "slack": float(slack[j])}
    elif not side_ok:
        j = int(np.argmax(wn))
        witness = {"kind": "side", "x": float(sx[j]), "y": float(sy[j]), "w_n": float(wn[j])}
    elif not step_ok:
        witness = {"kind": "proof_step", "x": 0.0, "y": float(b.r0),
                   "value": step, "bound": 0.25}
    checks = {"interior_min": float(worst[i]), "interior_ok": interior_ok,
              "proof_bound_min": float(np.min(proof)), "arc_min_slack": float(slack.min()),
              "arc_ok": arc_ok, "side_max_wn": float(wn.max()), "side_ok": side_ok,
              "log_step_value": step, "log_step_ok": step_ok}
    return Verdict(interior_ok and arc_ok and side_ok and step_ok, checks, witness,
                   {"gamma": gamma, "mu": mu, "eps": eps, "grid": n})


def barrier_A3(b: SingularCoeffBounds, n: int = 200, gamma_scale: float = 1.0):
    """Constants of the log barrier plus its verification; ``gamma_scale`` perturbs gamma only."""
    k = a3_constants(b)
    v = verify_A3(b, k.gamma * gamma_scale, k.mu, k.eps_A3, n)
    return k, v


# ---------------------------------------------------------------- oblique boundary test function

@dataclass(frozen=True)
class KSConstants:
    C_beta: float
    H: float
    eps_K: float
    r_K: float

    def as_dict(self):
        return asdict(self)


def ks_constants(C_beta: float) -> KSConstants:
    if not C_beta >= 1:
        raise DomainError("need C_beta >= 1", C_beta=C_beta)
    q = 64.0 * C_beta ** 4
    return KSConstants(C_beta, 1.0 - 1.0 / q, 1.0 / q, 1.0 / (4.0 * C_beta ** 2))


def ks_testfn(x, y, H):
    return 1.0 - x * x - (y - H) ** 2


def ks_worst_Dbeta(x, y, k: KSConstants):
    """min over |b1| <= C, b2 >= 1/C of D_beta g = -2 x b1 + 2 (H - y) b2 (-inf if H < y)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    hy = k.H - y
    return np.where(hy >= 0, -2 * np.abs(x) * k.C_beta + 2 * hy / k.C_beta, -np.inf)


def ks_proof_bound(x, k: KSConstants):
    """1/(2C) - 2|x| C, valid where H - y >= 1/4."""
    return 1.0 / (2 * k.C_beta) - 2 * np.abs(x) * k.C_beta


def verify_ks_testfn(C_beta: float, eps: float, samples) -> Verdict:
    """Check the hypothesis |f|_Lip <= eps <= eps_K on boundary samples (x, f(x)),
    then D_beta g >= 0 for every admissible beta at samples in the support of g."""
    k = ks_constants(C_beta)
    pts = np.asarray(samples, dtype=float)
    pts = pts[np.argsort(pts[:, 0])]
    slopes = np.abs(np.diff(pts[:, 1]) / np.diff(pts[:, 0]))
    lip = float(slopes.max()) if len(slopes) else 0.0
    x, y = pts[:, 0], pts[:, 1]
    supp = ks_testfn(x, y, k.H) > 0
    worst = ks_worst_Dbeta(x, y, k)
    bound = ks_proof_bound(x, k)
    hyp_ok = eps <= k.eps_K and lip <= eps * (1 + 1e-12)
    d_ok = bool(np.all(worst[supp] >= 0))
    witness = None
    if not hyp_ok:
        j = int(np.argmax(slopes)) if len(slopes) else 0
        witness = {"kind": "lipschitz", "x": float(x[j]), "y": float(y[j]),
                   "slope": lip, "eps": eps, "eps_K": k.eps_K}
    elif not d_ok:
        j = int(np.nonzero(supp)[0][np.argmin(worst[supp])])
        witness = {"kind": "D_beta", "x": float(x[j]), "y": float(y[j]), "value": float(worst[j])}
    checks = {"lipschitz": lip, "hypothesis_ok": bool(hyp_ok), "D_beta_ok": d_ok,
              "worst_min_on_support": float(worst[supp].min()) if supp.any() else None,
              "proof_bound_min_on_support": float(bound[supp].min()) if supp.any() else None,
              "n_support": int(supp.sum())}
    return Verdict(bool(hyp_ok and d_ok), checks, witness, k.as_dict())
