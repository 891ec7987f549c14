"""Command-line front end.

    wedgeshock <states|perturb|solve|verify-barriers|sweep> --config run.toml [--out DIR]
               [--strict] [--seed N] [--jobs N]

Exit codes: 0 success, 1 configuration error, 2 inadmissible physics,
3 solver breakdown, 4 predicate failure under --strict.

Outputs are JSON reports and CSV tables.  Each file carries the hash of the
configuration (output paths excluded) and the toolkit version, and contains
no timestamps or timings, so identical configurations give byte-identical
files.  The environment variable WEDGESHOCK_OUT overrides the configured
output directory; --out overrides both.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .errors import (CavitationError, ConfigError, ContinuationBreakdown, DivisionDomainError,
                     DomainError, EllipticityLoss, LinearSolveFailure, MeshQualityError,
                     NoAdmissibleRoot, NoIntersection, OscillationDetected, ParameterInfeasible,
                     SearchFailure, TrustRegionExit, WedgeShockError)

log = logging.getLogger("wedgeshock")

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_SOLVER, EXIT_STRICT = 0, 1, 2, 3, 4
PHYSICS_ERRORS = (NoAdmissibleRoot, CavitationError, DivisionDomainError, DomainError, NoIntersection,
                  ParameterInfeasible)
SOLVER_ERRORS = (ContinuationBreakdown, EllipticityLoss, LinearSolveFailure, MeshQualityError,
                 TrustRegionExit, OscillationDetected, SearchFailure)
ENV_OUT = "WEDGESHOCK_OUT"

DEFAULTS = {
    "gas": {"gamma": 2.0, "rho0": 1.0, "rho1": 2.0},
    "wedge": {"sigma0": 0.01, "delta": 0.0},
    "solver": {"resolution": [36, 70], "eps_ell": 0.02, "max_saturation": 0.25,
               "linearization": "newton", "max_outer": 200, "relaxation": 0.5,
               "energy_tol": 1e-11, "fb_tol_factor": 1e-7, "trust_factor": 10.0},
    "barriers": {"lam": 1.0, "Lam": 1.0, "C_E": 1.0, "alpha": 0.5, "r0": 0.1, "C_beta": 1.0,
                 "n_random": 10000, "n_grid": 200},
    "output": {"dir": "out"},
}


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in raw.items():
        if key in ("sweep",):
            cfg[key] = val
        elif key in cfg:
            if not isinstance(val, dict):
                raise ConfigError(f"[{key}] must be a table")
            cfg[key].update(val)
        else:
            raise ConfigError(f"unknown table [{key}]")
    validate(cfg)
    return cfg


def _num(cfg, table, key, lo=None, hi=None, strict_lo=False):
    v = cfg[table].get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{table}.{key} must be a finite number", value=repr(v))
    if lo is not None and (v <= lo if strict_lo else v < lo):
        raise ConfigError(f"{table}.{key} out of range", value=v, lower=lo)
    if hi is not None and v > hi:
        raise ConfigError(f"{table}.{key} out of range", value=v, upper=hi)
    return float(v)


def _grid(vals, name):
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"{name} must be a nonempty list")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in vals):
        raise ConfigError(f"{name} must contain numbers")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{name} must be strictly increasing", values=vals)
    return [float(v) for v in vals]


def validate(cfg: dict) -> None:
    g = _num(cfg, "gas", "gamma", 1.0)
    if g < 1:
        raise ConfigError("gas.gamma must be >= 1")
    r0 = _num(cfg, "gas", "rho0", 0.0, strict_lo=True)
    r1 = _num(cfg, "gas", "rho1", 0.0, strict_lo=True)
    if not r1 > r0:
        raise ConfigError("gas.rho1 must exceed gas.rho0", rho0=r0, rho1=r1)
    s0 = _num(cfg, "wedge", "sigma0", 0.0, math.pi / 2, strict_lo=True)
    d = _num(cfg, "wedge", "delta")
    if abs(d) > s0:
        raise ConfigError("wedge.delta must satisfy |delta| <= sigma0", sigma0=s0, delta=d)
    for key in ("sigma_grid", "delta_grid"):
        if key in cfg["wedge"]:
            cfg["wedge"][key] = _grid(cfg["wedge"][key], f"wedge.{key}")
    res = cfg["solver"]["resolution"]
    if (not isinstance(res, list) or len(res) != 2 or any(not isinstance(x, int) or isinstance(x, bool) for x in res)
            or res[0] < 2 or res[1] < 4 or res[1] % 2):
        raise ConfigError("solver.resolution must be [ni, nj] with ni >= 2 and even nj >= 4", value=res)
    if cfg["solver"]["linearization"] not in ("newton", "picard"):
        raise ConfigError("solver.linearization must be 'newton' or 'picard'")
    _num(cfg, "solver", "eps_ell", 0.0, 1.0, strict_lo=True)
    _num(cfg, "solver", "relaxation", 0.0, 1.0, strict_lo=True)
    for key in ("lam", "Lam", "C_E", "alpha", "r0", "C_beta"):
        _num(cfg, "barriers", key, 0.0)
    if "grid" in cfg["barriers"]:
        grid = cfg["barriers"]["grid"]
        if not isinstance(grid, dict):
            raise ConfigError("barriers.grid must be a table")
        for key in grid:
            if key not in ("lam", "Lam", "C_E", "alpha"):
                raise ConfigError(f"unknown barriers.grid key {key}")
            grid[key] = _grid(grid[key], f"barriers.grid.{key}")
    if "sweep" in cfg:
        sw = cfg["sweep"]
        kind = sw.get("kind", "solve")
        if kind == "solve":
            for key in ("sigma0", "delta"):
                if key not in sw:
                    raise ConfigError(f"sweep.{key} grid is required for kind = 'solve'")
                sw[key] = _grid(sw[key], f"sweep.{key}")
            for s in sw["sigma0"]:
                if not 0 < s < math.pi / 2 or any(abs(x) > s for x in sw["delta"]):
                    raise ConfigError("sweep cells need 0 < sigma0 and |delta| <= sigma0", sigma0=s)
        elif kind == "admissibility":
            for key in ("gamma", "ratio"):
                if key not in sw:
                    raise ConfigError(f"sweep.{key} grid is required for kind = 'admissibility'")
                sw[key] = _grid(sw[key], f"sweep.{key}")
        else:
            raise ConfigError("sweep.kind must be 'solve' or 'admissibility'", kind=kind)


def config_hash(cfg: dict, seed: int) -> str:
    body = {k: v for k, v in cfg.items() if k != "output"}
    body["seed"] = seed
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def resolve_out(cfg: dict, cli_out) -> Path:
    out = cli_out or os.environ.get(ENV_OUT) or cfg["output"]["dir"]
    p = Path(out)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {p}") from exc
    if not os.access(p, os.W_OK):
        raise ConfigError(f"output directory not writable: {p}")
    return p


# ---------------------------------------------------------------- serialization

def plain(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        return plain(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "as_dict"):
        return plain(obj.as_dict())
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


class Writer:
    def __init__(self, out: Path, chash: str):
        self.out, self.chash = out, chash
        self.written = []

    def json(self, name: str, payload: dict) -> None:
        doc = {"config_hash": self.chash, "version": __version__, **plain(payload)}
        text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
        (self.out / name).write_bytes(text.encode())
        self.written.append(name)

    def csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        buf.write(f"# config_hash={self.chash} version={__version__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        (self.out / name).write_bytes(buf.getvalue().encode())
        self.written.append(name)


def _params(cfg):
    from .states import gas_params
    g = cfg["gas"]
    return gas_params(float(g["gamma"]), float(g["rho0"]), float(g["rho1"]))


def _options(cfg):
    from .pde_solver import SolverOptions
    s = cfg["solver"]
    return SolverOptions(eps_ell=s["eps_ell"], max_saturation=s["max_saturation"],
                         linearization=s["linearization"], energy_tol=s["energy_tol"],
                         relaxation=s["relaxation"], fb_tol_factor=s["fb_tol_factor"],
                         trust_factor=s["trust_factor"], max_outer=int(s["max_outer"]))


# ---------------------------------------------------------------- commands

def cmd_states(cfg, w: Writer, args) -> int:
    from .geometry import shock_rays, sonic_arcs
    from .states import nonsym_states, normal_residuals, solve_normal, solve_regular
    params = _params(cfg)
    s0, d = cfg["wedge"]["sigma0"], cfg["wedge"]["delta"]
    nr = solve_normal(params)
    rr = solve_regular(params, s0, nr)
    ns = nonsym_states(params, s0, d, nr)
    w.json("states.json", {
        "incident": params.as_dict(),
        "normal": {**nr.as_dict(), "residuals": list(normal_residuals(nr, params))},
        "regular": rr.as_dict(),
        "nonsymmetric": ns.as_dict(),
    })
    ap, am = sonic_arcs(ns)
    lp, lm = shock_rays(ns, params)
    rows = []
    for tag, pts in (("sonic_plus", ap.sample()), ("sonic_minus", am.sample()),
                     ("shock_plus", np.array([lp.at(t) for t in np.linspace(0, 2 * nr.Y, 65)])),
                     ("shock_minus", np.array([lm.at(t) for t in np.linspace(0, 2 * nr.Y, 65)]))):
        rows += [(float(x), float(y), tag) for x, y in np.asarray(pts)]
    w.csv("curves.csv", ["xi", "eta", "tag"], rows)
    return EXIT_OK


def cmd_perturb(cfg, w: Writer, args) -> int:
    from .perturbation import (band_scaling, nonsymmetric_derivatives, sonic_motion_leading,
                               symmetric_derivatives)
    if "sigma_grid" not in cfg["wedge"]:
        raise ConfigError("perturb needs wedge.sigma_grid")
    params = _params(cfg)
    grid = cfg["wedge"]["sigma_grid"]
    w.json("perturb.json", {
        "symmetric": [r.as_dict() for r in symmetric_derivatives(params)],
        "nonsymmetric": {repr(s): [r.as_dict() for r in nonsymmetric_derivatives(params, s)] for s in grid},
        "band_scaling": band_scaling(params, grid),
        "sonic_motion": sonic_motion_leading(params, grid),
    })
    return EXIT_OK


def run_solve(cfg, sigma0, delta):
    """Free-boundary solve plus diagnostics; never raises for divergence."""
    from .pde_solver import antisym_probe, diagnostics, solve_configuration, symmetric_defect
    params = _params(cfg)
    fld, shock, rep = solve_configuration(params, sigma0, delta, tuple(cfg["solver"]["resolution"]),
                                          _options(cfg), raise_on_failure=False)
    diag = diagnostics(fld)
    out = {"sigma0": sigma0, "delta": delta, "free_boundary": rep.as_dict(), "diagnostics": diag.as_dict(),
           "defect": symmetric_defect(fld).as_dict(), "probe": antisym_probe(fld).as_dict()}
    return fld, shock, out


def cmd_solve(cfg, w: Writer, args) -> int:
    from .pde_solver import shock_to_csv
    s0, d = cfg["wedge"]["sigma0"], cfg["wedge"]["delta"]
    fld, shock, out = run_solve(cfg, s0, d)
    g = fld.nodal_gradients()
    rho = fld.rho
    w.csv("field.csv", ["xi", "eta", "phi", "u", "v", "rho"],
          [(p[0], p[1], f, a[0], a[1], r) for p, f, a, r in zip(fld.mesh.nodes, fld.phi, g, rho)])
    w.csv("shock.csv", ["eta", "xi"], list(zip(shock.eta, shock.xi)))
    w.json("diagnostics.json", out)
    fb = out["free_boundary"]
    verdict = {"status": fb["status"], "converged": fb["converged"], "failure": fb["failure"],
               "predicates_pass": out["diagnostics"]["all_pass"],
               "failed_predicates": [k for k, e in out["diagnostics"]["entries"].items() if e["pass"] is False]}
    w.json("verdict.json", verdict)
    if not fb["converged"]:
        return EXIT_SOLVER
    if args.strict and not verdict["predicates_pass"]:
        return EXIT_STRICT
    return EXIT_OK


def _barrier_cell(lam, Lam, C_E, alpha, r0, n_grid):
    from .barriers import SingularCoeffBounds, barrier_A3, eps_A1
    b = SingularCoeffBounds(lam, Lam, C_E, alpha, r0)
    k, v = barrier_A3(b, n_grid)
    return {"lam": lam, "Lam": Lam, "C_E": C_E, "alpha": alpha, "eps_A1": eps_A1(b),
            "gamma": k.gamma, "mu": k.mu, "ok": v.ok, "witness": v.witness}


def cmd_verify_barriers(cfg, w: Writer, args) -> int:
    from .barriers import (SingularCoeffBounds, a2_gamma_threshold, barrier_A3, check_conformal_bounds,
                           eps_A1, ks_constants, verify_ks_testfn)
    bc = cfg["barriers"]
    b = SingularCoeffBounds(bc["lam"], bc["Lam"], bc["C_E"], bc["alpha"], bc["r0"])
    k, v = barrier_A3(b, int(bc["n_grid"]))
    _, v_half = barrier_A3(b, int(bc["n_grid"]), gamma_scale=0.5)
    conf = check_conformal_bounds(b, int(bc["n_random"]), seed=args.seed)
    ks = ks_constants(bc["C_beta"])
    xs = np.linspace(-ks.r_K, ks.r_K, 201)
    flat = verify_ks_testfn(bc["C_beta"], ks.eps_K, np.stack([xs, np.zeros_like(xs)], 1))
    steep = verify_ks_testfn(bc["C_beta"], 2 * ks.eps_K, np.stack([xs, 2 * ks.eps_K * np.abs(xs)], 1))
    w.json("barriers.json", {
        "bounds": {"lam": b.lam, "Lam": b.Lam, "C_E": b.C_E, "alpha": b.alpha, "r0": b.r0},
        "eps_A1": eps_A1(b),
        "A2_gamma_threshold": a2_gamma_threshold(b.lam, b.Lam, 0.0),
        "A2_conformal_bounds": conf.as_dict(),
        "A3_constants": k.as_dict() if hasattr(k, "as_dict") else vars(k),
        "A3_verdict": v.as_dict(),
        "A3_verdict_half_gamma": v_half.as_dict(),
        "KS_constants": ks.as_dict(),
        "KS_flat": flat.as_dict(),
        "KS_double_eps": steep.as_dict(),
    })
    grid = bc.get("grid")
    if grid:
        axes = [grid.get(key, [bc[key]]) for key in ("lam", "Lam", "C_E", "alpha")]
        cells = [(a, B, c, al) for a in axes[0] for B in axes[1] for c in axes[2] for al in axes[3]]
        rows = []
        for a, B, c, al in cells:
            if a > B:
                rows.append((a, B, c, al, "", "", "", "skipped", "lam > Lam"))
                continue
            try:
                r = _barrier_cell(a, B, c, al, bc["r0"], int(bc["n_grid"]))
                rows.append((a, B, c, al, r["eps_A1"], r["gamma"], r["mu"], str(r["ok"]).lower(),
                             json.dumps(plain(r["witness"]), sort_keys=True) if r["witness"] else ""))
            except WedgeShockError as exc:
                rows.append((a, B, c, al, "", "", "", "error", type(exc).__name__))
        w.csv("barriers_grid.csv", ["lam", "Lam", "C_E", "alpha", "eps_A1", "gamma", "mu", "verdict", "witness"], rows)
    if args.strict and not (v.ok and conf.ok and flat.ok):
        return EXIT_STRICT
    return EXIT_OK


def _sweep_cell(payload):
    cfg, s0, d = payload
    try:
        _, _, out = run_solve(cfg, s0, d)
        fb, diag = out["free_boundary"], out["diagnostics"]
        return {"sigma0": s0, "delta": d, "status": fb["status"], "iterations": fb["iterations"],
                "sup_mismatch": fb["sup_mismatch"], "defect": out["defect"]["value"],
                "all_pass": diag["all_pass"], "error": None}
    except WedgeShockError as exc:
        return {"sigma0": s0, "delta": d, "status": "error", "iterations": None, "sup_mismatch": None,
                "defect": None, "all_pass": None, "error": exc.to_record()}


def _admissibility_cell(payload):
    from .states import gas_params, solve_normal
    gamma, ratio = payload
    try:
        params = gas_params(gamma, 1.0, ratio)
        nr = solve_normal(params)
        return {"gamma": gamma, "ratio": ratio, "Z": nr.Z, "rho2bar": nr.rho2bar, "c2bar2": nr.c2bar2,
                "admissible": bool(nr.Z > 0 and nr.rho2bar > params.rho1 and nr.Z ** 2 < nr.c2bar2),
                "error": None}
    except WedgeShockError as exc:
        return {"gamma": gamma, "ratio": ratio, "Z": None, "rho2bar": None, "c2bar2": None,
                "admissible": False, "error": exc.to_record()}


def cmd_sweep(cfg, w: Writer, args) -> int:
    if "sweep" not in cfg:
        raise ConfigError("sweep needs a [sweep] table")
    sw = cfg["sweep"]
    kind = sw.get("kind", "solve")
    if kind == "solve":
        cells = [(cfg, s, d) for s in sw["sigma0"] for d in sw["delta"]]
        fn = _sweep_cell
    else:
        cells = [(g, r) for g in sw["gamma"] for r in sw["ratio"]]
        fn = _admissibility_cell
    jobs = max(1, int(args.jobs))
    if jobs == 1:
        results = [fn(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(fn, cells))  # map preserves cell order
    payload = {"kind": kind, "cells": results}
    if kind == "solve":
        payload["defect_fits"] = _defect_fits(results)
        header = ["sigma0", "delta", "status", "iterations", "sup_mismatch", "defect", "all_pass"]
    else:
        header = ["gamma", "ratio", "Z", "rho2bar", "c2bar2", "admissible"]
    w.json("sweep.json", payload)
    w.csv("sweep.csv", header, [[("" if r[h] is None else r[h]) for h in header] for r in results])
    if kind == "solve" and args.strict and not all(r["all_pass"] for r in results):
        return EXIT_STRICT
    if kind == "admissibility" and args.strict and not all(r["admissible"] for r in results):
        return EXIT_STRICT
    return EXIT_OK


def _defect_fits(results):
    """Log-log fit of defect against delta for each sigma0 with at least two positive deltas."""
    fits = {}
    for s in sorted({r["sigma0"] for r in results}):
        pts = [(r["delta"], r["defect"]) for r in results
               if r["sigma0"] == s and r["delta"] > 0 and r["defect"] and r["defect"] > 0]
        if len(pts) >= 2:
            x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            fits[repr(s)] = {"exponent": float(np.polyfit(x, y, 1)[0]), "n": len(pts)}
    return fits


COMMANDS = {"states": cmd_states, "perturb": cmd_perturb, "solve": cmd_solve,
            "verify-barriers": cmd_verify_barriers, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wedgeshock", description=__doc__.split("\n\n")[0])
    ap.add_argument("verb", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, metavar="PATH")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--strict", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        out = resolve_out(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    w = Writer(out, config_hash(cfg, args.seed))
    try:
        code = COMMANDS[args.verb](cfg, w, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PHYSICS_ERRORS as exc:
        w.json("error.json", exc.to_record())
        print(f"inadmissible: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except SOLVER_ERRORS as exc:
        w.json("error.json", exc.to_record())
        print(f"solver breakdown: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    log.info("wrote %s", ", ".join(w.written))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
