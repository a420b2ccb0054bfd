"""
Command-line front end.

Exit codes: 0 ok, 1 verification failure, 2 invalid input, 3 degenerate
problem, 4 infeasible construction.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import DegenerateProblemError, PostselectionError, ValidationError
from .jsonio import (
    config_hash,
    dumps,
    format_float,
    load_setup,
    load_tolerances,
    matrix_to_json,
    result_document,
    tolerances_to_json,
)
from .optimizer import (
    DetectorMoments,
    Rescaling,
    amplifying_detector_state,
    design_rho_tilde,
    detector_moments,
    extremal_outputs,
    pointer,
    standardize,
    tradeoff_bound,
)
from .oracle import ScanConfig, boundary_scan, region_scan
from .simulator import conditional_mean
from .suites import run_suites
from .weak_values import weak_values

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_DEGENERATE, EXIT_INFEASIBLE = 0, 1, 2, 3, 4

SIMULATE_COLUMNS = ["lambda", "N_exact", "mean_exact", "mean_interp", "mean_aav", "abs_err_interp", "abs_err_aav"]


class Infeasible(Exception):
    pass


# -- helpers --------------------------------------------------------------------------

def _parse_moments(text: str) -> DetectorMoments:
    try:
        a, c, s = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError("expected three comma-separated numbers a,c,s", path="--moments") from None
    if not all(math.isfinite(v) for v in (a, c, s)):
        raise ValidationError("moments must be finite", path="--moments")
    return DetectorMoments(a, c, s)


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise ValidationError("expected lo:hi:n", path="--lambda-grid") from None
    if len(parts) != 3 or n < 1 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError("expected lo:hi:n with n >= 1", path="--lambda-grid")
    if n == 1:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("WMOPT_THREADS")
        if env is None:
            return 1
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"not an integer: {env!r}", path="WMOPT_THREADS") from None
    if n < 1:
        raise ValidationError("must be >= 1", path="--threads")
    return n


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _point(p):
    return None if p is None else p.as_list()


def _extrema_payload(m: DetectorMoments, scale: Rescaling | None = None) -> dict:
    e = extremal_outputs(m)
    out = {
        "max_value": e.max_value,
        "min_value": e.min_value,
        "max_point": _point(e.max_point),
        "min_point": _point(e.min_point),
        "degenerate": e.degenerate,
        "attained_at_infinity": e.attained_at_infinity,
    }
    if scale is not None and scale.lambda_sigma_q != 0:
        for key, p in (("max_physical", e.max_point), ("min_physical", e.min_point)):
            if p is None:
                out[key] = None
            else:
                A_w, B_w = scale.to_physical(p)
                out[key] = {"A_w": [A_w.real, A_w.imag], "B_w": B_w}
    return out


def _moments_payload(m: DetectorMoments) -> dict:
    return {
        "a": m.a, "c": m.c, "s": m.s,
        "o_mean": m.o_mean, "sigma_o": m.sigma_o,
        "q_mean": m.q_mean, "sigma_q": m.sigma_q, "xi_mean": m.xi_mean,
    }


def _emit(args, command, payload, config):
    doc = result_document(command, payload, config)
    _write(dumps(doc), getattr(args, "json", None))


def _load(args):
    tol = load_tolerances(args.tolerance_file) if args.tolerance_file else None
    return load_setup(args.setup, tol)


# -- commands ---------------------------------------------------------------------

def cmd_optimize(args) -> int:
    if args.setup is None and args.moments is None:
        raise ValidationError("give a setup file or --moments a,c,s", path="setup")
    payload = {}
    scale = None
    if args.moments is not None:
        m = _parse_moments(args.moments)
        cfg = config_hash("optimize", args.moments)
    else:
        sf = _load(args)
        m, scale = standardize(sf.setup)
        cfg = config_hash("optimize", sf.source_hash, tolerances_to_json(sf.tolerances))
        _, cw = weak_values(sf.setup.E_f, sf.setup.rho_i, sf.setup.A)
        payload["lambda_sigma_q"] = scale.lambda_sigma_q
        if cw.orthogonal_flag:
            payload["weak_values"] = {"orthogonal": True}
        else:
            p = scale.to_point(cw.A_w, cw.B_w)
            payload["weak_values"] = {
                "orthogonal": False,
                "A_w": [cw.A_w.real, cw.A_w.imag],
                "B_w": cw.B_w,
                "rescaled": p.as_list(),
            }
    payload["moments"] = _moments_payload(m)
    payload["extrema"] = _extrema_payload(m, scale)
    if not math.isnan(m.sigma_o):
        b = tradeoff_bound(m)
        payload["tradeoff"] = {"bound": b.bound, "sigma_o": m.sigma_o, "saturates_sr": b.saturates_sr}
    else:
        payload["tradeoff"] = None
    _emit(args, "optimize", payload, cfg)

    if args.csv:
        # output along the boundary curve through both extrema
        e = payload["extrema"]
        ref = e["max_point"] or e["min_point"]
        theta = math.atan2(ref[1], ref[0]) if ref[0] or ref[1] else 0.0
        span = max(3.0, 3 * math.hypot(ref[0], ref[1]))
        rows = []
        for t in np.linspace(-span, span, 601):
            x, y = t * math.cos(theta), t * math.sin(theta)
            z = x * x + y * y
            rows.append([float(t), x, y, z, (m.c * x - m.a * y + m.s * z) / (1 + z)])
        _write(_csv_text(["t", "x", "y", "z", "value"], rows), args.csv)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sf = _load(args)
    grid = _parse_grid(args.lambda_grid)
    rows = []
    for lam in grid:
        lam = float(lam)
        try:
            out = conditional_mean(sf.setup.replace(lam=lam))
        except PostselectionError:
            rows.append([lam, 0.0, None, None, None, None, None])
            continue
        err_i = abs(out.mean_exact - out.mean_interp)
        err_a = None if out.mean_aav is None else abs(out.mean_exact - out.mean_aav)
        rows.append([lam, out.N_exact, out.mean_exact, out.mean_interp, out.mean_aav, err_i, err_a])
    _write(_csv_text(SIMULATE_COLUMNS, rows), args.csv)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise ValidationError("must be >= 1", path="--trials")
    threads = _threads(args)
    results = run_suites(args.suite, args.trials, args.seed, threads)
    payload = {
        "suite": args.suite,
        "trials": args.trials,
        "seed": args.seed,
        "suites": {r.name: r.as_dict(args.seed) for r in results},
        "ok": all(r.ok for r in results),
    }
    _emit(args, "verify", payload, config_hash("verify", args.suite, args.trials, args.seed))
    for r in results:
        if not r.ok:
            where = "" if r.failing_index is None else f" (reproduce with --seed {args.seed}, sample index {r.failing_index})"
            print(f"suite {r.name}: {r.passed}/{r.samples} passed{where}", file=sys.stderr)
    return EXIT_OK if payload["ok"] else EXIT_VERIFY


def cmd_amplify(args) -> int:
    sf = _load(args)
    setup = sf.setup
    ref = detector_moments(setup.rho_det, setup.q, setup.o)
    target = args.target_s if args.target_s is not None else 10 * ref.sigma_o
    if not math.isfinite(target):
        raise ValidationError("must be finite", path="--target-s")
    xi, _, _ = pointer(setup.q, setup.rho_det)
    rho_tilde = design_rho_tilde(xi, setup.o, target)
    if rho_tilde is None:
        raise Infeasible(f"no rho_tilde on the complement of ker xi reaches s = {target:.6g}")
    plan = amplifying_detector_state(xi, setup.o, rho_tilde, target)
    if not plan.feasible:
        raise Infeasible(plan.infeasibility_reason)
    m = detector_moments(plan.rho_det.matrix, setup.q, setup.o)
    ext = _extrema_payload(m, Rescaling(setup.lam * m.sigma_q))
    payload = {
        "target_s": target,
        "achieved_s": plan.achieved_s,
        "tr_o_rho_tilde": float(np.trace(setup.o.matrix @ rho_tilde).real),
        "kernel_dim": plan.kernel_dim,
        "rho_det": matrix_to_json(plan.rho_det.matrix),
        "rho_tilde": matrix_to_json(rho_tilde),
        "reference_moments": _moments_payload(ref),
        "moments": _moments_payload(m),
        "extrema": ext,
        "ratio_max_over_sigma_o": ext["max_value"] / m.sigma_o if m.sigma_o > 0 else None,
        "ratio_max_over_reference_sigma_o": ext["max_value"] / ref.sigma_o if ref.sigma_o > 0 else None,
    }
    cfg = config_hash("amplify", sf.source_hash, target, tolerances_to_json(sf.tolerances))
    _emit(args, "amplify", payload, cfg)
    return EXIT_OK


def cmd_scan(args) -> int:
    m = _parse_moments(args.moments)
    cfg = ScanConfig(grid_radius=args.radius, grid_points_per_axis=args.points, threads=_threads(args))
    b = boundary_scan(m, cfg)
    r = region_scan(m, cfg)
    payload = {
        "moments": _moments_payload(m),
        "boundary": {
            "best": {"value": b.best.value, "point": list(b.best.point), "at_search_edge": b.best.at_search_edge},
            "worst": {"value": b.worst.value, "point": list(b.worst.point), "at_search_edge": b.worst.at_search_edge},
            "final_radius": b.radius,
        },
        "region": r.extra,
    }
    _emit(args, "scan", payload, config_hash("scan", args.moments, args.radius, args.points))
    if args.csv:
        theta = np.linspace(0, 2 * np.pi, 73)
        radii = np.linspace(0, args.radius, 101)
        rows = []
        for rr in radii:
            for th in theta:
                x, y = rr * math.cos(th), rr * math.sin(th)
                z = rr * rr
                rows.append([float(rr), float(th), x, y, z, (m.c * x - m.a * y + m.s * z) / (1 + z)])
        _write(_csv_text(["r", "theta", "x", "y", "z", "value"], rows), args.csv)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmopt", description="Postselected weak-measurement simulator and optimizer")
    p.add_argument("--version", action="version", version=f"wmopt {__version__}")
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--tolerance-file", help="JSON file with validation tolerances")
    glob.add_argument("--seed", type=int, default=0, help="master seed for random sweeps")
    glob.add_argument("--threads", type=int, default=None, help="worker threads (default: $WMOPT_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", parents=[glob], help="extremal outputs and optimal weak values")
    o.add_argument("setup", nargs="?")
    o.add_argument("--moments", help="a,c,s instead of a setup file")
    o.add_argument("--json", help="write the result document here (default stdout)")
    o.add_argument("--csv", help="write the output along the optimal boundary curve here")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", parents=[glob], help="exact and approximate outputs over a coupling grid")
    s.add_argument("setup")
    s.add_argument("--lambda-grid", default="0:0.1:11", help="lo:hi:n (default 0:0.1:11)")
    s.add_argument("--csv", help="output file (default stdout)")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[glob], help="run the seeded property suites")
    v.add_argument("--suite", choices=["cauchy", "bounds", "optima", "coupling", "all"], default="all")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--json", help="write the result document here (default stdout)")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("amplify", parents=[glob], help="detector preparation with a large sandwich average")
    a.add_argument("setup")
    a.add_argument("--target-s", type=float, default=None, help="required s (default 10 sigma_o of the setup's detector)")
    a.add_argument("--json", help="write the result document here (default stdout)")
    a.set_defaults(func=cmd_amplify)

    sc = sub.add_parser("scan", parents=[glob], help="brute-force boundary and region scans for given moments")
    sc.add_argument("--moments", required=True, help="a,c,s")
    sc.add_argument("--radius", type=float, default=50.0)
    sc.add_argument("--points", type=int, default=400)
    sc.add_argument("--json", help="write the result document here (default stdout)")
    sc.add_argument("--csv", help="write a polar table of the boundary values here")
    sc.set_defaults(func=cmd_scan)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateProblemError, PostselectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
