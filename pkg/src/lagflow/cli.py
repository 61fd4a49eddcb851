"""``lagflow`` command line: verification sweeps, integrals, classification, flows and export.

Exit codes: 0 success, 1 verification failure or numerical breakdown, 2 usage
or parse error.  Errors are reported as a JSON document on stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import __version__
from . import classifier as clf
from . import core
from . import families as fam
from . import flow as fl
from .discrete import laplace_beltrami, unwrap_angle
from .errors import LagflowError, WrongFamily
from .surface import Cell, as_real

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# default tolerances per residual and jet mode
TOLERANCES = {
    "analytic": {
        "lagrangian": 1e-10,
        "conformality": 1e-10,
        "self_similar": 1e-8,
        "angle_gradient": 1e-8,
        "monotonicity": 1e-8,
        "normality": 1e-8,
        "beta_harmonic": 1e-4,
        "structure": 1e-8,
    },
    "fd": {
        "lagrangian": 1e-6,
        "conformality": 1e-6,
        "self_similar": 1e-5,
        "angle_gradient": 1e-5,
        "monotonicity": 1e-5,
        "normality": 1e-5,
        "beta_harmonic": 1e-4,
        "structure": 1e-8,
    },
}
STRUCTURE_GRID = 8   # nodes per axis for the structure-equation sweep


class UsageError(LagflowError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_tols(items, mode):
    tols = dict(TOLERANCES[mode])
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
        name, val = (x.strip() for x in item.split("=", 1))
        if name not in tols:
            raise UsageError(f"unknown tolerance {name!r}; known: {sorted(tols)}")
        try:
            tols[name] = float(val)
        except ValueError:
            raise UsageError(f"tolerance {name!r} is not a number: {val!r}") from None
    return tols


def _family(text: str):
    surface = fam.surface_from_string(text)
    if surface.a is None:
        raise WrongFamily(f"{text!r} is not a self-similar family surface")
    return surface


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def verify(surface, grid: int, mode: str, tols: dict):
    """Residual sweep over the fundamental cell; returns (document, all_pass)."""
    jmode = "analytic" if mode == "analytic" else "fd"
    s, t = surface.cell.grid(grid, grid)
    j = surface.jet(s, t, jmode)
    m = core.metric(j, tol_conf=1.0)
    a = surface.a
    dbeta = surface.dbeta(s, t) if (surface.dbeta is not None and jmode == "analytic") \
        else core.fd_dbeta(surface, s, t, mode=jmode)
    res = {
        "lagrangian": np.abs(core.lagrangian_defect(j)),
        "conformality": m.conformality_defect(),
        "self_similar": core.self_similar_residual(j, a, m) / (1 + core.norm(j.phi)),
        "angle_gradient": core.angle_gradient_identity_defect(j, dbeta, m),
        "monotonicity": core.monotonicity_defect(j, dbeta, a),
        "normality": core.normality_defect(j, m),
    }
    report = core.GeometryReport.from_arrays(s, t, res, {
        "surface": surface.name, "grid": [grid, grid], "jet_mode": jmode, "tolerances": tols})
    aggregates = dict(report.aggregates)

    aggregates["beta_harmonic"] = {"max": beta_harmonic_residual(surface, grid)}

    ps = clf.profile_from_family(surface)
    ss, tt = surface.cell.grid(STRUCTURE_GRID, STRUCTURE_GRID)
    structure = clf.structure_defects(surface, (ss, tt), ps)
    aggregates["structure"] = {"max": max(float(np.max(v)) for v in structure.values())}
    for k, v in sorted(structure.items()):
        aggregates[f"structure.{k}"] = {"max": float(np.max(v)), "rms": float(np.sqrt(np.mean(v ** 2)))}

    passed = {k: bool(aggregates[k]["max"] <= tol) for k, tol in tols.items()}
    doc = {
        "command": "verify",
        "surface": surface.name,
        "grid": [grid, grid],
        "jet_mode": jmode,
        "tolerances": tols,
        "aggregates": aggregates,
        "pass": passed,
        "ok": all(passed.values()),
    }
    return doc, doc["ok"]


def beta_harmonic_residual(surface, grid: int, ring: int = 2) -> float:
    """Max |discrete Laplace-Beltrami of the unwrapped Lagrangian angle| away from the grid edge."""
    cell = Cell(surface.cell.origin, surface.cell.e1, surface.cell.e2, (False, False))
    s, t = cell.grid(grid, grid)
    X = surface(s, t)
    beta = unwrap_angle(core.lagrangian_angle(surface.jet(s, t)))
    du, dv = cell.spacing(grid, grid)
    d1, d2 = du * math.hypot(*cell.e1), dv * math.hypot(*cell.e2)
    lap = laplace_beltrami(X, d1, d2, (False, False), F=beta)
    return float(np.max(np.abs(lap[ring:-ring, ring:-ring])))


def integral(surface, grid: int, which: str, mode: str):
    jmode = "analytic" if mode == "analytic" else "fd"
    fn = core.area_integral if which == "area" else core.willmore_integral
    quad = fn(surface, n=grid, mode=jmode)
    doc = {"command": which, "surface": surface.name, "grid": [grid, grid], "quadrature": quad}
    closed = None
    if all(surface.cell.periodic):  # the quadrature covers a whole compact quotient
        try:
            closed = (fam.closed_form_area if which == "area" else fam.closed_form_willmore)(surface.spec)
        except LagflowError:
            closed = None
    if closed is not None:
        doc["closed_form"] = closed
        doc["rel_error"] = abs(quad - closed) / abs(closed)
    return doc


_INVARIANTS = {
    "delta": ("cosh^2(delta)", lambda x: math.cosh(x) ** 2),
    "gamma": ("cos^2(gamma)", lambda x: math.cos(x) ** 2),
    "nu": ("sinh^2(nu)", lambda x: math.sinh(x) ** 2),
}


def classify_doc(surface):
    residual, cls = clf.roundtrip_congruence(surface)
    ps = clf.profile_from_family(surface)
    doc = {
        "command": "classify",
        "surface": surface.name,
        "branch": cls.label,
        "profile_branch": cls.branch,
        "family": cls.family,
        "shape_name": cls.shape_name,
        "shape_param": cls.shape_param,
        "g0": cls.g0,
        "mu": ps.mu,
        "alpha": ps.alpha,
        "E": ps.E,
        "roundtrip_residual": residual,
    }
    if cls.shape_name in _INVARIANTS:
        name, fn = _INVARIANTS[cls.shape_name]
        doc["invariant"] = {"name": name, "value": fn(cls.shape_param)}
    return doc


def flow_doc(surface, grid: int, dt: Optional[float], t_end: Optional[float]):
    a = surface.a
    if t_end is None:
        # compact shrinkers run past the exact extinction time -1/(2a) so that the
        # extrapolated estimate is reported; others stop at scale sqrt(0.3) or t = 1
        if a < 0:
            t_end = 0.6 / -a if all(surface.cell.periodic) else 0.35 / -a
        else:
            t_end = 1.0
    state = fl.init_flow(surface, grid, dt=dt)
    sample_dt = t_end / 50
    traj = fl.run(state, t_end, sample_dt=sample_dt, ss_every=5, interior=2)
    area0 = traj.area[0]
    t_last = traj.time[-1]
    ss = [e for e in traj.ss_error if not math.isnan(e)]
    summary = {
        "command": "flow",
        "surface": surface.name,
        "grid": [grid, grid],
        "dt": state.dt,
        "boundary": list(state.boundary),
        "t_end": t_end,
        "final_time": t_last,
        "reason": traj.reason,
        "extinct": traj.extinct,
        "T_est": traj.T_est,
        "T_exact": (-1 / (2 * a)) if a < 0 else None,
        "area_ratio": traj.area[-1] / area0,
        "expected_area_ratio": 2 * a * t_last + 1,
        "max_ss_error": max(ss) if ss else None,
        "samples": len(traj.time),
    }
    return summary, traj


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "area", "max_H", "ss_error"])
    for row in traj.rows():
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# -- sample / export ---------------------------------------------------------

def project_r3(points, projection: str = "drop-y2", pole=None):
    """R^4 -> R^3 for OBJ export; returns (xyz, metadata)."""
    R = as_real(points).reshape(-1, 4)
    if projection == "drop-y2":
        return R[:, :3], {"projection": "drop-y2", "formula": "(x1, y1, x2)", "isometric": False}
    if projection == "stereo":
        P = np.asarray(pole if pole is not None else (0.0, 0.0, 0.0, 1.0), dtype=float)
        r = float(np.linalg.norm(P))
        if r == 0:
            raise UsageError("stereographic pole must be nonzero")
        e = P / r
        # orthonormal basis completing e, fixed by QR for reproducibility
        Q, _ = np.linalg.qr(np.column_stack([e, np.eye(4)]))
        basis = Q[:, 1:4]
        w = R @ e
        if np.any(np.isclose(w, r, rtol=0, atol=1e-12 * max(r, 1.0))):
            raise UsageError("a sample coincides with the projection pole's hyperplane")
        xyz = r * (R @ basis) / (r - w)[:, None]
        return xyz, {"projection": "stereo", "pole": P.tolist(), "isometric": False,
                     "formula": "r * <X, b_k> / (r - <X, e>), e = pole/|pole|, r = |pole|"}
    raise UsageError(f"unknown projection {projection!r}")


def sample_csv(s, t, pts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "t", "x1", "y1", "x2", "y2"])
    R = as_real(pts).reshape(-1, 4)
    for si, ti, r in zip(np.ravel(s), np.ravel(t), R):
        w.writerow([repr(float(si)), repr(float(ti))] + [repr(float(v)) for v in r])
    return buf.getvalue()


def sample_obj(pts, periodic, projection: str, pole=None):
    n1, n2 = pts.shape[:2]
    xyz, meta = project_r3(pts, projection, pole)
    lines = [f"# lagflow {__version__}: {n1}x{n2} grid, projection {meta['projection']} (not isometric)"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in xyz.tolist()]
    idx = np.arange(n1 * n2).reshape(n1, n2) + 1
    m1 = n1 if periodic[0] else n1 - 1
    m2 = n2 if periodic[1] else n2 - 1
    for i in range(m1):
        for k in range(m2):
            i2, k2 = (i + 1) % n1, (k + 1) % n2
            lines.append(f"f {idx[i, k]} {idx[i2, k]} {idx[i2, k2]} {idx[i, k2]}")
    meta.update({"grid": [n1, n2], "faces": m1 * m2, "wrap": list(periodic)})
    return "\n".join(lines) + "\n", meta


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lagflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lagflow {__version__}")
    p.add_argument("command", choices=["verify", "area", "willmore", "classify", "flow", "sample"])
    p.add_argument("family", help="family spec, e.g. psi:a=-0.5,m=1,n=2 or phi:a=0.25,delta=0.8814")
    p.add_argument("--grid", type=int, default=None,
                   help="nodes per axis (default: 64; 256 for area/willmore)")
    p.add_argument("--mode", choices=["analytic", "fd"], default="analytic", help="jet mode (default: analytic)")
    p.add_argument("--dt", type=float, default=None, help="flow time step (default: half the CFL bound)")
    p.add_argument("--t-end", type=float, default=None,
                   help="flow end time (default: 0.6/|a| for compact shrinkers, 0.35/|a| for other "
                        "shrinkers, 1 for expanders)")
    p.add_argument("--format", default=None,
                   help="output format: json (default) or csv for flow; csv (default), json or obj for sample")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VAL",
                   help="override a verify tolerance; names: " + ", ".join(sorted(TOLERANCES["analytic"])))
    p.add_argument("--projection", choices=["drop-y2", "stereo"], default="drop-y2",
                   help="R^4 -> R^3 projection for OBJ export (default: drop-y2)")
    p.add_argument("--pole", default=None, metavar="X1,Y1,X2,Y2", help="stereographic pole")
    return p


def _error(exc: Exception) -> int:
    code = exc.code if isinstance(exc, LagflowError) else type(exc).__name__
    sys.stdout.write(dumps({"error": code, "message": str(exc)}))
    return EXIT_USAGE if isinstance(exc, ValueError) else EXIT_FAIL


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _error(exc)
    try:
        return _dispatch(args)
    except LagflowError as exc:
        return _error(exc)


def _dispatch(args) -> int:
    cmd = args.command
    grid = args.grid if args.grid is not None else (256 if cmd in ("area", "willmore") else 64)
    if grid < 2:
        raise UsageError("--grid must be at least 2")
    if cmd == "sample":
        fmt = args.format or "csv"
        if fmt not in ("csv", "json", "obj"):
            raise UsageError(f"unknown format {fmt!r} for sample")
        surface = fam.surface_from_string(args.family)
        s, t, pts = surface.sample(grid, grid)
        if fmt == "csv":
            _write(sample_csv(s, t, pts), args.out)
        elif fmt == "json":
            _write(dumps({"surface": surface.name, "grid": [grid, grid], "columns": ["s", "t", "x1", "y1", "x2", "y2"],
                          "rows": np.column_stack([np.ravel(s), np.ravel(t),
                                                   as_real(pts).reshape(-1, 4)]).tolist()}), args.out)
        else:
            pole = None
            if args.pole:
                try:
                    pole = [float(x) for x in args.pole.split(",")]
                except ValueError:
                    raise UsageError(f"malformed --pole {args.pole!r}") from None
                if len(pole) != 4:
                    raise UsageError("--pole needs four comma-separated numbers")
            text, meta = sample_obj(pts, surface.cell.periodic, args.projection, pole)
            meta["surface"] = surface.name
            _write(text, args.out)
            if args.out:
                _write(dumps(meta), args.out + ".json")
        return EXIT_OK

    fmt = args.format or "json"
    if fmt not in ("json", "csv") or (fmt == "csv" and cmd != "flow"):
        raise UsageError(f"unknown format {fmt!r} for {cmd}")
    surface = _family(args.family)
    if cmd == "verify":
        tols = _parse_tols(args.tol, args.mode)
        doc, ok = verify(surface, grid, args.mode, tols)
        _write(dumps(doc), args.out)
        return EXIT_OK if ok else EXIT_FAIL
    if args.tol:
        raise UsageError("--tol applies to verify only")
    if cmd in ("area", "willmore"):
        _write(dumps(integral(surface, grid, cmd, args.mode)), args.out)
    elif cmd == "classify":
        _write(dumps(classify_doc(surface)), args.out)
    else:
        summary, traj = flow_doc(surface, grid, args.dt, args.t_end)
        if fmt == "csv":
            _write(trajectory_csv(traj), args.out)
        else:
            _write(dumps(summary), None)
            if args.out:
                _write(trajectory_csv(traj), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
