"""Command-line interface: ``cvop {solve,trace,verify,report}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .algorithm import (RunConfig, SolveResult, Status, outer_violation, run,
                        sandwich_distances)
from .geometry import NormSpec
from .problem import ProblemError, load_problem
from .scalarization import SolverError, dual_value
from .vertex_enum import PolytopeError

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_SOLVER, EXIT_CAP = 0, 1, 2, 3, 4
SLOPE_SLACK = 0.3
TOL_SANDWICH = 1e-6

log = logging.getLogger("cvop")


class UsageError(Exception):
    pass


def _setup_logging():
    level = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("CVOP_LOG", "quiet").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _g(x) -> str:
    return format(float(x), ".17g")


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(args):
    try:
        inst = load_problem(args.problem)
        if getattr(args, "norm", None):
            inst = inst.with_norm(NormSpec.parse(args.norm))
    except (ProblemError, ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    return inst


def _positive(name):
    def conv(s):
        x = float(s)
        if not x > 0 or not math.isfinite(x):
            raise argparse.ArgumentTypeError(f"{name} must be a positive number")
        return x
    return conv


# --- solve -------------------------------------------------------------------------------------

def _solution_csv(inst, res: SolveResult) -> str:
    header = ["index"] + [f"x{i + 1}" for i in range(inst.n)] + [f"y{i + 1}" for i in range(inst.q)]
    rows = [[i] + [_g(a) for a in x] + [_g(b) for b in y]
            for i, (x, y) in enumerate(zip(res.minimizers, res.images))]
    return _csv_text(header, rows)


def _outer_csv(inst, res: SolveResult) -> str:
    header = ["kind"] + [f"c{i + 1}" for i in range(inst.q)] + ["offset"]
    rows = [["halfspace"] + [_g(a) for a in h.normal] + [_g(h.offset)] for h in res.outer.halfspaces]
    rows += [["vertex"] + [_g(a) for a in v] + [""] for v in res.vertices.vertices]
    return _csv_text(header, rows)


def cmd_solve(args) -> int:
    inst = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(epsilon=args.eps, max_iters=args.max_iters, threads=args.threads)
    res = run(inst, cfg)
    _write(out / "solution.csv", _solution_csv(inst, res))
    _write(out / "outer.csv", _outer_csv(inst, res))
    metrics.write_log_csv(out / "log.csv", res.log)
    lines = [f"problem: {inst.name}", f"norm: {inst.norm.value}", f"status: {res.status.value}",
             f"k: {res.k}", f"epsilon: {_g(args.eps)}", f"gamma: {_g(res.gamma)}",
             f"minimizers: {len(res.minimizers)}", f"outer_vertices: {len(res.vertices)}"]
    if res.status is Status.CONVERGED:
        d = sandwich_distances(res, inst, tol=args.eps + TOL_SANDWICH)
        ok = bool(d.max() <= args.eps + TOL_SANDWICH)
        lines.append(f"sandwich: {'PASS' if ok else 'FAIL'} max_dist={_g(d.max())}")
    _write(out / "summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_CAP if res.status is Status.CAP else EXIT_OK


# --- trace -------------------------------------------------------------------------------------

def cmd_trace(args) -> int:
    if args.iters < 10:
        raise UsageError("--iters must be at least 10")
    inst = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig.indefinite(args.iters, epsilon=args.eps, max_iters=args.max_iters,
                               threads=args.threads, track_hausdorff=True)
    res = run(inst, cfg)
    metrics.write_log_csv(out / "log.csv", res.log)
    euclid = inst.norm is NormSpec.L2
    target = metrics.theoretical_exponent(inst.q, euclid)
    lines = [f"problem: {inst.name}", f"norm: {inst.norm.value}", f"status: {res.status.value}",
             f"cuts: {len(res.cuts)}", f"theoretical_exponent: {_g(target)}"]
    try:
        fit = metrics.fit_slope(res.log, args.burn_in)
        ok = fit.slope <= target + SLOPE_SLACK
        lines += [f"slope: {_g(fit.slope)}", f"intercept: {_g(fit.intercept)}", f"r2: {_g(fit.r2)}",
                  f"criterion: slope <= {_g(target + SLOPE_SLACK)} {'PASS' if ok else 'FAIL'}"]
    except metrics.InsufficientData as exc:
        lines += [f"slope: n/a ({exc})", "criterion: FAIL"]
    _write(out / "slope.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_CAP if res.status is Status.CAP else EXIT_OK


# --- verify ------------------------------------------------------------------------------------

def verify_run(inst, res: SolveResult, samples: int, seed: int, eps: float,
               n_dual: int = 10) -> list[tuple[str, bool, str]]:
    """Invariant checks on a finished run; returns (name, passed, detail) triples."""
    rng = np.random.default_rng(seed)
    X = inst.sample_feasible(samples, rng)
    Y = np.array([inst.gamma_map(x) for x in X])
    scale = 1.0 + float(np.abs(res.vertices.vertices).max())
    checks = []

    # duality gap on a seeded subset of the solved vertices
    sols = [c.solution for c in res.cuts]
    sols += list(res.state.v_known.values())
    worst, where = 0.0, -1
    pick = rng.choice(len(sols), size=min(n_dual, len(sols)), replace=False) if sols else []
    for i in sorted(int(p) for p in pick):
        s = sols[i]
        d = dual_value(inst, s.v, s.w, s.lam, res.gamma, res.w_bar)
        rel = (s.objective_value - d) / (1.0 + abs(s.objective_value))
        if rel > worst:
            worst, where = rel, i
    checks.append(("duality_gap", worst <= 1e-6, f"worst relative gap {worst:.3e}"
                   + (f" at solve {where}" if worst > 1e-6 else "")))

    # cut validity, per emitted halfspace
    bad = [(c.k, outer_violation([c.halfspace], Y, inst.norm)) for c in res.cuts]
    bad = [(k, v) for k, v in bad if v > 1e-6 * scale]
    base = outer_violation(res.outer.halfspaces[:res.state.n_initial_rows - 1], Y, inst.norm)
    ok = not bad and base <= 1e-6 * scale
    checks.append(("cut_validity", ok, "all halfspaces contain the sampled images" if ok else
                   f"violated at iteration {bad[0][0] if bad else 'init'}"))

    # H-sequence equality
    fails = [r.k for r in res.log if r.hausdorff_consecutive is not None
             and abs(r.hausdorff_consecutive - r.max_dist) > 1e-5 * (1.0 + r.max_dist)]
    checks.append(("h_sequence", not fails, "consecutive Hausdorff equals max |z|" if not fails
                   else f"mismatch at iteration {fails[0]}"))

    # nestedness of the recorded outer polytopes
    nest_fail = None
    hs = res.outer.halfspaces
    for k, vrep in enumerate(res.state.history[1:], start=1):
        n_rows = res.state.n_initial_rows + k - 1
        A = np.array([h.normal for h in hs[:n_rows]])
        b = np.array([h.offset for h in hs[:n_rows]])
        nrm = np.linalg.norm(A, axis=1)
        if np.any((vrep.vertices @ A.T - b) / nrm < -1e-7 * scale):
            nest_fail = k
            break
    checks.append(("nestedness", nest_fail is None, "outer polytopes are nested" if nest_fail is None
                   else f"vertex outside previous polytope at iteration {nest_fail}"))

    # gamma sanity
    top = float(np.max(Y @ res.w_bar))
    checks.append(("gamma_sanity", top < res.gamma - 1e-9,
                   f"max w_bar @ Gamma(x) = {top:.6g} < gamma = {res.gamma:.6g}"))

    # sandwich
    if res.status is Status.CONVERGED:
        d = sandwich_distances(res, inst, tol=eps + TOL_SANDWICH)
        ok = bool(d.max() <= eps + TOL_SANDWICH)
        checks.append(("sandwich", ok, f"max distance to inner approximation {d.max():.6g}"))
    else:
        checks.append(("sandwich", False, f"run did not converge ({res.status.value})"))
    return checks


def cmd_verify(args) -> int:
    inst = _load(args)
    cfg = RunConfig(epsilon=args.eps, max_iters=args.max_iters, threads=args.threads, seed=args.seed,
                    track_hausdorff=True, keep_history=True)
    res = run(inst, cfg)
    checks = verify_run(inst, res, args.samples, args.seed, args.eps)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_FAIL


# --- report ------------------------------------------------------------------------------------

def _svg(xs, ys, fit, ref, title) -> str:
    W, H, pad = 640, 440, 60
    allx = np.concatenate([xs, ref[0]]) if len(ref[0]) else xs
    ally = np.concatenate([ys, ref[1]]) if len(ref[1]) else ys
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def py(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
           f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
           f'<text x="{W / 2:.1f}" y="{H - 15}" text-anchor="middle" font-size="13">log k</text>',
           f'<text x="18" y="{H / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 18 {H / 2:.1f})">log distance</text>']
    for t in np.linspace(x0, x1, 6):
        out.append(f'<text x="{px(t):.1f}" y="{H - pad + 18}" text-anchor="middle" font-size="11">{t:.2f}</text>')
    for t in np.linspace(y0, y1, 6):
        out.append(f'<text x="{pad - 6}" y="{py(t) + 4:.1f}" text-anchor="end" font-size="11">{t:.2f}</text>')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2" fill="#1f77b4"/>')
    if fit is not None:
        a, b = fit
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(a * x0 + b):.2f}" x2="{px(x1):.2f}" '
                   f'y2="{py(a * x1 + b):.2f}" stroke="#d62728" stroke-width="1.5"/>')
    if len(ref[0]):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(*ref))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#2ca02c" stroke-dasharray="6,4" stroke-width="1.5"/>')
    out.append(f'<text x="{W - pad}" y="{pad - 8}" text-anchor="end" font-size="11" fill="#d62728">regression</text>')
    out.append(f'<text x="{W - pad}" y="{pad + 6}" text-anchor="end" font-size="11" fill="#2ca02c">reference</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    recs = metrics.read_log_csv(args.log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ks = np.array([r.k for r in recs], dtype=float)
    ds = np.array([r.max_dist for r in recs])
    use = (ks >= 1) & (ds > 0)
    if not use.any():
        raise metrics.LogFormatError("no records with k >= 1 and positive distance")
    ks, ds = ks[use], ds[use]
    lx, ly = np.log(ks), np.log(ds)
    try:
        fit = metrics.fit_power_law(ks, ds, args.burn_in)
        line = (fit.slope, fit.intercept)
    except metrics.InsufficientData:
        fit, line = None, None
    ref = np.log(metrics.theoretical_curve(args.q, args.euclidean, args.c, ks))
    e = metrics.theoretical_exponent(args.q, args.euclidean)
    title = f"log distance vs log k; reference log({args.c:g} k^{e:.3g})"
    _write(out / "plot.svg", _svg(lx, ly, line, (lx, ref), title))
    rows = [[int(k), _g(a), _g(b), _g(line[0] * a + line[1]) if line else "", _g(r)]
            for k, a, b, r in zip(ks, lx, ly, ref)]
    _write(out / "plot_data.csv", _csv_text(["k", "log_k", "log_dist", "fit", "reference"], rows))
    print(f"slope: {fit.slope:.6g}" if fit else "slope: n/a", f"reference_exponent: {e:.6g}")
    return EXIT_OK


# --- entry -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvop", description="Outer approximation solver for convex vector "
                                "optimization problems with polyhedral ordering cones.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, eps_default=None):
        sp.add_argument("problem", help="builtin name (e.g. example1_q2) or path to a TOML problem file")
        sp.add_argument("--eps", type=_positive("--eps"), default=eps_default, required=eps_default is None)
        sp.add_argument("--norm", choices=["l1", "l2", "linf"], help="override the problem file's norm")
        sp.add_argument("--threads", type=int, default=max(1, os.cpu_count() or 1))
        sp.add_argument("--max-iters", type=int, default=100_000)

    s = sub.add_parser("solve", help="run to termination and write the solution")
    common(s)
    s.add_argument("--out", default="cvop_out")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("trace", help="perform a fixed number of cuts and fit the convergence slope")
    common(t, eps_default=1e-12)
    t.add_argument("--iters", type=int, required=True)
    t.add_argument("--burn-in", type=float, default=0.2)
    t.add_argument("--out", default="cvop_trace")
    t.set_defaults(func=cmd_trace)

    v = sub.add_parser("verify", help="solve and check the invariants, one line per check")
    common(v)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="plot a log.csv against a reference rate")
    r.add_argument("log")
    r.add_argument("--q", type=int, required=True)
    r.add_argument("--euclidean", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--c", type=_positive("--c"), default=1.0)
    r.add_argument("--burn-in", type=float, default=0.2)
    r.add_argument("--out", default="cvop_report")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except (UsageError, metrics.LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SolverError, PolytopeError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
