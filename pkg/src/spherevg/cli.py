"""Command-line front end.

Subcommands: ``eval`` (one pair of endpoints), ``grid`` (scan r2 over a
plane), ``series-study`` (accuracy of the small-v expansion) and
``selfcheck`` (brute-force cross validation).

Exit codes: 0 success, 1 usage or parse error, 2 shadowed or otherwise
invalid physical input, 3 selfcheck failure.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import oracle, quartic
from .dynamics import PhysicalParams
from .errors import EndpointInsideSphere, ShadowedInput, SphereVGError
from .geometry import Scene, reduce
from .propagator import vg_propagator
from .reflection import (
    alpha_series,
    geometry_from_uv,
    solve_alpha_exact,
    solve_alpha_newton,
    solve_reflection,
)

GRID_COLUMNS = (
    "x2", "y2", "z2", "u", "v", "alpha", "ell_plus", "ell_minus", "L", "S", "D",
    "D_sign", "free_re", "free_im", "refl_re", "refl_im", "total_re", "total_im",
    "path_class", "res_eq4", "res_eq5", "res_eq6",
)
EVAL_COLUMNS = ("x1", "y1", "z1") + GRID_COLUMNS[:6] + ("x",) + GRID_COLUMNS[6:]
SERIES_COLUMNS = ("u", "v", "alpha_exact", "alpha_series", "abs_error", "fitted_slope")
SELFCHECK_COLUMNS = ("check", "max_discrepancy", "tolerance", "passed")
ERROR_COLUMNS = ("error", "path_class", "message")

INSIDE_SPHERE = "InsideSphere"

# maximum allowed discrepancy per cross-check quantity
SELFCHECK_TOLERANCES = {
    "alpha": 1e-9,
    "L": 1e-10,
    "S": 1e-10,
    "hessian": 1e-4,
    "D": 1e-4,
    "newton": 1e-11,
    "residual_eq4": 1e-10,
    "residual_eq5": 1e-10,
    "residual_eq6": 1e-12,
    "quartic_residual": 1e-10,
    "quartic_companion": 1e-9,
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    a: float = 1.0
    params: PhysicalParams = PhysicalParams()
    fmt: str = "csv"
    verify: bool = False
    seed: int = 0


# ----------------------------------------------------------------------
# formatting

def _fmt_csv(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RecordWriter:
    """Emit records as CSV (header first) or JSON Lines."""

    def __init__(self, stream, fmt: str, columns):
        self.stream = stream
        self.fmt = fmt
        self.columns = tuple(columns)
        self._csv = None
        if fmt == "csv":
            self._csv = csv.writer(stream, lineterminator="\n")
            self._csv.writerow(self.columns)

    def write(self, record: dict):
        if self._csv is not None:
            self._csv.writerow([_fmt_csv(record.get(c)) for c in self.columns])
        else:
            obj = {c: _json_value(record.get(c)) for c in self.columns}
            self.stream.write(json.dumps(obj, allow_nan=False) + "\n")


def parse_vec(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"expected x,y,z but got {text!r}")
    try:
        vec = np.array([float(s) for s in parts])
    except ValueError as exc:
        raise UsageError(f"bad vector {text!r}: {exc}") from None
    if not np.all(np.isfinite(vec)):
        raise UsageError(f"non-finite vector {text!r}")
    return vec


_PLANE_RE = re.compile(r"^normal=([^=]+?)(?:,origin=([^=]+))?$")


def parse_plane(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``normal=nx,ny,nz[,origin=ox,oy,oz]`` -> (origin, e1, e2)."""
    match = _PLANE_RE.match(text.replace(" ", ""))
    if not match:
        raise UsageError(f"bad plane {text!r}; expected normal=nx,ny,nz[,origin=x,y,z]")
    normal = parse_vec(match.group(1))
    origin = parse_vec(match.group(2)) if match.group(2) else np.zeros(3)
    norm = np.linalg.norm(normal)
    if norm == 0.0:
        raise UsageError("plane normal must be nonzero")
    normal = normal / norm
    # deterministic in-plane axes: project the coordinate axis least aligned with the normal
    ref = np.eye(3)[int(np.argmin(np.abs(normal)))]
    e1 = ref - (ref @ normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return origin, e1, e2


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(s) for s in text.split(","))
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected lo,hi") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise UsageError(f"range needs finite lo < hi, got {text!r}")
    return lo, hi


# ----------------------------------------------------------------------
# record construction

def _empty_record(r2) -> dict:
    rec = {c: None for c in GRID_COLUMNS}
    rec["x2"], rec["y2"], rec["z2"] = (float(c) for c in r2)
    return rec


def point_record(a: float, r1, r2, params: PhysicalParams, verify: bool = False,
                 strict: bool = True) -> dict:
    """Everything known about one endpoint pair, keyed by column name."""
    scene = Scene(a, r1, r2)
    res = vg_propagator(scene, params, strict=strict, verify=verify)
    g = reduce(scene)
    rec = _empty_record(scene.r2)
    rec.update(
        u=g.u, v=g.v, path_class=res.path_class.value,
        free_re=res.free_term.real, free_im=res.free_term.imag,
    )
    if res.reflected_valid:
        deriv = res.derivatives
        sol = deriv.solution
        rec.update(
            alpha=sol.alpha, x=sol.x, ell_plus=sol.ell_plus, ell_minus=sol.ell_minus,
            L=sol.L, S=deriv.S, D=deriv.D, D_sign=res.D_sign,
            refl_re=res.reflected_term.real, refl_im=res.reflected_term.imag,
            total_re=res.total.real, total_im=res.total.imag,
            res_eq4=sol.residual_eq4, res_eq5=sol.residual_eq5, res_eq6=sol.residual_eq6,
        )
        rec.update({k: v for k, v in res.diagnostics.items() if k.startswith("alpha_")})
    return rec


def grid_nodes(origin, e1, e2, lo, hi, res):
    """Row-major node list: the second in-plane axis is the slow index."""
    ticks = np.linspace(lo, hi, res)
    return [origin + s * e1 + t * e2 for t in ticks for s in ticks]


def _grid_node(args):
    a, r1, r2, params = args
    try:
        return point_record(a, r1, r2, params, strict=False)
    except EndpointInsideSphere:
        rec = _empty_record(r2)
        rec["path_class"] = INSIDE_SPHERE
        return rec


def worker_count() -> int:
    raw = os.environ.get("SPHEREVG_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"SPHEREVG_THREADS must be an integer, got {raw!r}") from None


def grid_records(a, r1, nodes, params, workers: int = 1) -> list[dict]:
    jobs = [(a, r1, node, params) for node in nodes]
    if workers <= 1:
        return [_grid_node(job) for job in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_grid_node, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def fitted_slope(v, err) -> float:
    v = np.asarray(v, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = err > 0.0
    return float(np.polyfit(np.log(np.abs(v[keep])), np.log(err[keep]), 1)[0])


def series_study(u_values=(0.1, 0.3, 0.5, 0.7, 0.9), rel_range=(1e-3, 3e-2),
                 points: int = 9) -> list[dict]:
    """Series error against the exact angle, log-spaced ``v = s (1 - u)``."""
    rows = []
    for u in u_values:
        scale = 1.0 - u
        vs = np.geomspace(rel_range[0] * scale, rel_range[1] * scale, points)
        block = []
        for v in vs:
            g = geometry_from_uv(u, float(v))
            exact = solve_alpha_exact(g)
            approx = alpha_series(g)
            block.append(dict(u=u, v=float(v), alpha_exact=exact, alpha_series=approx,
                              abs_error=abs(approx - exact)))
        slope = fitted_slope([r["v"] for r in block], [r["abs_error"] for r in block])
        for r in block:
            r["fitted_slope"] = slope
        rows += block
    return rows


# ----------------------------------------------------------------------
# selfcheck

def selfcheck(n_scenes: int = 200, seed: int = 0, n_hessian: int = 20,
              n_quartic: int = 1000) -> dict:
    """Run the brute-force cross-checks and return the worst discrepancy per check."""
    rng = np.random.default_rng(seed)
    params = PhysicalParams(1.0, 1.0, 1.0)
    worst = {k: 0.0 for k in SELFCHECK_TOLERANCES}

    def bump(key, value):
        worst[key] = max(worst[key], float(value)) if math.isfinite(value) else math.inf

    for k in range(n_scenes):
        scene = oracle.random_scene(rng)
        try:
            report = oracle.cross_check(scene, params, with_hessian=k < n_hessian)
            for key, value in report.discrepancies.items():
                bump(key, value)
            sol = solve_reflection(scene)
            bump("newton", abs(solve_alpha_newton(sol.geometry) - sol.alpha))
            bump("residual_eq4", sol.residual_eq4)
            bump("residual_eq5", sol.residual_eq5)
            bump("residual_eq6", sol.residual_eq6)
        except SphereVGError:
            for key in ("alpha", "L", "S", "newton"):
                worst[key] = math.inf

    for _ in range(n_quartic):
        u = rng.uniform(0.0, 1.0)
        v = rng.uniform(-0.5, 0.5)
        coeffs = quartic.eq9_coeffs(u, v)
        roots = quartic.solve_quartic(coeffs)
        bump("quartic_residual", max(roots.residuals, default=0.0) / coeffs.scale)
        ref = oracle.companion_roots(coeffs.as_tuple()[4 - roots.degree:])
        got = np.array(roots.roots)
        if got.size != ref.size:
            worst["quartic_companion"] = math.inf
            continue
        for z in ref:
            bump("quartic_companion", np.min(np.abs(got - z)) / max(1.0, abs(z)))
    return worst


# ----------------------------------------------------------------------
# argument handling

def _add_common(parser):
    parser.add_argument("--a", type=float, default=1.0, help="sphere radius")
    parser.add_argument("--mass", type=float, default=1.0)
    parser.add_argument("--hbar", type=float, default=1.0)
    parser.add_argument("--time", type=float, default=1.0)
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default="-", help="output file, '-' or 'stdout' for stdout")
    parser.add_argument("--verify", action="store_true",
                        help="cross-check the closed form against Newton iteration")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spherevg",
        description="Semiclassical propagator for a particle bouncing off a hard sphere.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate one endpoint pair")
    _add_common(p_eval)
    p_eval.add_argument("--r1", required=True)
    p_eval.add_argument("--r2", required=True)

    p_grid = sub.add_parser("grid", help="scan r2 over a plane")
    _add_common(p_grid)
    p_grid.add_argument("--r1", required=True)
    p_grid.add_argument("--plane", default="normal=0,0,1")
    p_grid.add_argument("--range", default=None, help="lo,hi along both axes (default -5a,5a)")
    p_grid.add_argument("--res", type=int, default=101)

    p_series = sub.add_parser("series-study", help="small-v series error study")
    _add_common(p_series)
    p_series.add_argument("--u-values", default="0.1,0.3,0.5,0.7,0.9")
    p_series.add_argument("--points", type=int, default=9)

    p_self = sub.add_parser("selfcheck", help="brute-force cross validation")
    _add_common(p_self)
    p_self.add_argument("--scenes", type=int, default=200)
    p_self.add_argument("--hessian-scenes", type=int, default=20)
    return parser


def _open_out(target: str):
    if target in ("-", "stdout"):
        return sys.stdout, False
    return open(target, "w", newline=""), True


def _config(args) -> RunConfig:
    try:
        params = PhysicalParams(args.mass, args.hbar, args.time)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not (args.a > 0.0 and math.isfinite(args.a)):
        raise UsageError(f"--a must be positive, got {args.a!r}")
    return RunConfig(args.a, params, args.format, args.verify, args.seed)


def _run(args, out) -> int:
    cfg = _config(args)
    if args.command == "eval":
        r1, r2 = parse_vec(args.r1), parse_vec(args.r2)
        try:
            rec = point_record(cfg.a, r1, r2, cfg.params, verify=cfg.verify)
        except (ShadowedInput, EndpointInsideSphere) as exc:
            cls = getattr(exc, "path_class", None)
            writer = RecordWriter(out, cfg.fmt, ERROR_COLUMNS)
            writer.write(dict(error=type(exc).__name__,
                              path_class=cls.value if cls else None, message=str(exc)))
            return 2
        rec["x1"], rec["y1"], rec["z1"] = (float(c) for c in r1)
        cols = EVAL_COLUMNS + (("alpha_newton", "alpha_discrepancy") if cfg.verify else ())
        RecordWriter(out, cfg.fmt, cols).write(rec)
        return 0

    if args.command == "grid":
        r1 = parse_vec(args.r1)
        if np.linalg.norm(r1) <= cfg.a:
            raise EndpointInsideSphere("r1 lies inside the sphere")
        origin, e1, e2 = parse_plane(args.plane)
        lo, hi = parse_range(args.range) if args.range else (-5.0 * cfg.a, 5.0 * cfg.a)
        if args.res < 2:
            raise UsageError("--res must be at least 2")
        nodes = grid_nodes(origin, e1, e2, lo, hi, args.res)
        writer = RecordWriter(out, cfg.fmt, GRID_COLUMNS)
        for rec in grid_records(cfg.a, r1, nodes, cfg.params, worker_count()):
            writer.write(rec)
        return 0

    if args.command == "series-study":
        try:
            u_values = [float(s) for s in args.u_values.split(",")]
        except ValueError:
            raise UsageError(f"bad --u-values {args.u_values!r}") from None
        if args.points < 2:
            raise UsageError("--points must be at least 2")
        writer = RecordWriter(out, cfg.fmt, SERIES_COLUMNS)
        for row in series_study(u_values, points=args.points):
            writer.write(row)
        return 0

    if args.command == "selfcheck":
        start = time.perf_counter()
        worst = selfcheck(max(args.scenes, 1), cfg.seed, args.hessian_scenes)
        writer = RecordWriter(out, cfg.fmt, SELFCHECK_COLUMNS)
        ok = True
        for key, tol in SELFCHECK_TOLERANCES.items():
            passed = worst[key] <= tol
            ok &= passed
            writer.write(dict(check=key, max_discrepancy=worst[key], tolerance=tol,
                              passed=passed))
        print(f"selfcheck {'PASS' if ok else 'FAIL'} "
              f"({time.perf_counter() - start:.1f} s)", file=sys.stderr)
        return 0 if ok else 3
    raise UsageError(f"unknown command {args.command!r}")


_VALUE_FLAGS = ("--r1", "--r2", "--range", "--plane", "--u-values")


def _join_values(argv):
    """Turn ``--r2 -2,0,0`` into ``--r2=-2,0,0`` so negative vectors parse."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; this tool reserves 2 for physics errors
        return 0 if exc.code in (0, None) else 1
    try:
        out, close = _open_out(args.out)
    except OSError as exc:
        print(f"spherevg: cannot open output: {exc}", file=sys.stderr)
        return 1
    try:
        return _run(args, out)
    except BrokenPipeError:
        # the reader (e.g. head) went away; point stdout at devnull so the
        # final flush does not raise again
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except UsageError as exc:
        print(f"spherevg: error: {exc}", file=sys.stderr)
        return 1
    except SphereVGError as exc:
        print(f"spherevg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    finally:
        if close:
            out.close()
        else:
            out.flush()


if __name__ == "__main__":
    sys.exit(main())
