"""Hausdorff distances, enclosing balls, rate constants and log-log regression of run logs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .geometry import NormSpec
from .scalarization import (TOL_ZERO, LiftedProgram, SolverConfig, barrier_solve,
                            distance_to_hpolytope, project_onto_polytope)
from .vertex_enum import HPolytope, VRep

CSV_HEADER = ["k", "max_dist", "hausdorff_consecutive", "n_vertices", "n_solves", "n_cache_hits", "wall_ms"]
TOL_NESTED = 1e-7


class InsufficientData(ValueError):
    pass


class LogFormatError(ValueError):
    pass


@dataclass
class IterationRecord:
    """Metrics for one pass over the vertices of the k-th outer polytope."""

    k: int
    max_dist: float
    n_vertices: int
    n_solves: int
    n_cache_hits: int
    hausdorff_outer_to_upper: float
    hausdorff_consecutive: float | None = None
    wall_time: float = 0.0


# --- Hausdorff distances ---------------------------------------------------------------------

def _check_nested(prev: VRep, cur: VRep, norm, cfg, prev_h: HPolytope | None):
    if prev_h is not None:
        A, b = prev_h.unit_rows()
        scale = prev.scale()
        if np.any(cur.vertices @ A.T - b < -TOL_NESTED * scale):
            raise ValueError("polytopes are not nested: a vertex of cur violates a halfspace of prev")
        return
    scale = prev.scale()
    for y in cur.vertices:
        if project_onto_polytope(y, prev, norm=norm, cfg=cfg).dist > TOL_NESTED * scale:
            raise ValueError("polytopes are not nested: a vertex of cur lies outside prev")


def hausdorff_consecutive(prev: VRep, cur: VRep, norm: NormSpec = NormSpec.L2,
                          cfg: SolverConfig = SolverConfig(), prev_h: HPolytope | None = None) -> float:
    """Hausdorff distance between nested polytopes ``cur`` ⊆ ``prev``.

    For nested sets it reduces to the largest distance from a vertex of ``prev`` to ``cur``.
    Pass ``prev_h`` to test nestedness against halfspaces instead of by projection.
    """
    _check_nested(prev, cur, norm, cfg, prev_h)
    if len(prev) == 0:
        return 0.0
    best = 0.0
    for v in prev.vertices:
        if np.any(np.max(np.abs(cur.vertices - v), axis=1) <= 1e-12 * prev.scale()):
            continue
        best = max(best, project_onto_polytope(v, cur, norm=norm, cfg=cfg).dist)
    return best


def hausdorff_after_cut(prev: VRep, cur_h: HPolytope, cur: VRep, norm: NormSpec = NormSpec.L2,
                        cfg: SolverConfig = SolverConfig()) -> float:
    """Same quantity as :func:`hausdorff_consecutive`, using the halfspace form of ``cur``.

    Vertices of ``prev`` that survive the cut contribute zero, so only the removed ones are
    projected. The centroid of ``cur``'s vertices serves as the strictly interior start.
    """
    A, b = cur_h.unit_rows()
    scale = prev.scale()
    removed = prev.vertices[np.any(prev.vertices @ A.T - b < -1e-9 * scale, axis=1)]
    if removed.shape[0] == 0:
        return 0.0
    centre = cur.vertices.mean(axis=0)
    return max(distance_to_hpolytope(v, A, b, centre, norm, cfg).dist for v in removed)


# --- enclosing ball and rate constants ------------------------------------------------------

class Ball(NamedTuple):
    center: np.ndarray
    radius: float


def min_enclosing_ball(points, cfg: SolverConfig = SolverConfig()) -> Ball:
    """Smallest Euclidean ball containing ``points`` (rows), as a second-order cone program."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("need at least one point")
    m, q = P.shape
    uniq = np.unique(P, axis=0)
    if uniq.shape[0] == 1:
        return Ball(uniq[0].copy(), 0.0)
    # variables u = (c, r); block i requires r >= ||p_i - c||
    N = q + 1
    F = np.zeros((m, q + 1, N))
    F[:, 0, q] = 1.0
    F[:, 1:, :q] = -np.eye(q)
    f = np.zeros((m, q + 1))
    f[:, 1:] = P
    c_obj = np.zeros(N)
    c_obj[q] = 1.0
    prog = LiftedProgram(N, c_obj=c_obj, soc_F=F, soc_f=f)
    c0 = P.mean(axis=0)
    u0 = np.concatenate([c0, [np.linalg.norm(P - c0, axis=1).max() * 1.5 + 1e-3]])
    scale = 1.0 + np.abs(P).max()
    res = barrier_solve(prog, u0, SolverConfig(tol_gap=min(cfg.tol_gap, 1e-12)), gap_scale=scale)
    c = res.u[:q]
    return Ball(c, float(np.linalg.norm(P - c, axis=1).max()))


def unit_ball_volume(q: int) -> float:
    """Volume of the Euclidean unit ball in R^q."""
    return math.pi ** (q / 2.0) / math.gamma(q / 2.0 + 1.0)


@dataclass(frozen=True)
class RateConstants:
    """Constants of the rate bound, with R taken from a containing polytope (an upper bound)."""

    q: int
    R: float
    pi_q: float
    pi_qminus1: float
    lambda_bar: float
    theoretical_exponent: float
    R_is_upper_bound: bool = True


def theoretical_exponent(q: int, euclidean: bool) -> float:
    if q < 2:
        raise ValueError("q must be at least 2")
    return (2.0 if euclidean else 1.0) / (1.0 - q)


def rate_constants(vertices, euclidean: bool = True) -> RateConstants:
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    q = V.shape[1]
    R = min_enclosing_ball(V).radius
    if R <= 0:
        raise ValueError("degenerate vertex set: circumradius is zero")
    pq, pq1 = unit_ball_volume(q), unit_ball_volume(q - 1)
    lam = 16.0 * R * (q * pq / pq1) ** (2.0 / (q - 1))
    return RateConstants(q, R, pq, pq1, lam, theoretical_exponent(q, euclidean))


# --- regression --------------------------------------------------------------------------------

class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    n_used: int


def fit_power_law(ks, ds, burn_in: float = 0.2, tol_zero: float = TOL_ZERO) -> SlopeFit:
    """OLS of ``log d`` against ``log k``.

    Points with ``k < 1`` or ``d <= tol_zero`` are unusable; at least 10 usable points are
    required, and the leading ``burn_in`` fraction of them is dropped before fitting.
    """
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must lie in [0, 1)")
    ks = np.asarray(ks, dtype=float)
    ds = np.asarray(ds, dtype=float)
    keep = (ks >= 1) & np.isfinite(ds) & (ds > tol_zero)
    ks, ds = ks[keep], ds[keep]
    if ks.size < 10:
        raise InsufficientData(f"need at least 10 usable records, have {ks.size}")
    start = int(math.floor(burn_in * ks.size))
    x, y = np.log(ks[start:]), np.log(ds[start:])
    if np.ptp(x) == 0:
        raise InsufficientData("all usable records share one k")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2, int(x.size))


def fit_slope(log: Sequence[IterationRecord], burn_in: float = 0.2) -> SlopeFit:
    """Empirical convergence exponent of ``hausdorff_outer_to_upper`` against k."""
    return fit_power_law([r.k for r in log], [r.hausdorff_outer_to_upper for r in log], burn_in)


def theoretical_curve(q: int, euclidean: bool, c: float, ks) -> list:
    """Reference curve ``c k^e`` with ``e = 2/(1-q)`` (Euclidean) or ``1/(1-q)``."""
    e = theoretical_exponent(q, euclidean)
    return [float(c * float(k) ** e) for k in ks]


# --- CSV ---------------------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def log_to_csv(log: Iterable[IterationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in log:
        w.writerow([_fmt(r.k), _fmt(r.max_dist), _fmt(r.hausdorff_consecutive), _fmt(r.n_vertices),
                    _fmt(r.n_solves), _fmt(r.n_cache_hits), _fmt(r.wall_time * 1000.0)])
    return buf.getvalue()


def write_log_csv(path, log: Iterable[IterationRecord]) -> None:
    Path(path).write_text(log_to_csv(log), encoding="utf-8", newline="")


def read_log_csv(path) -> list[IterationRecord]:
    """Parse a log written by :func:`write_log_csv`; raises LogFormatError on malformed input."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LogFormatError(str(exc)) from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise LogFormatError(f"missing or wrong header; expected {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise LogFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            k, md, hc, nv, ns, nh, ms = row
            rec = IterationRecord(int(k), float(md), int(nv), int(ns), int(nh), float(md),
                                  float(hc) if hc.strip() else None, float(ms) / 1000.0)
        except ValueError as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from exc
        out.append(rec)
    if not out:
        raise LogFormatError("log has no records")
    return out
