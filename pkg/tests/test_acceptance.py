"""End-to-end acceptance criteria, one test per criterion.

Each test records a verdict through the ``acceptance`` fixture; the terminal summary prints
one PASS/FAIL line per criterion. Expensive runs are shared through module-level caches.
"""

import functools
import time

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from cvop.algorithm import RunConfig, Status, initialize, outer_violation, run, sandwich_distances, step
from cvop.geometry import Halfspace, dual_norm_eval
from cvop.metrics import fit_slope, theoretical_exponent
from cvop.problem import BUILTINS, builtin
from cvop.scalarization import dual_value, solve_modified, solve_norm_min
from cvop.vertex_enum import HPolytope, cut_update, enumerate_brute, match_vertex_sets

pytestmark = pytest.mark.acceptance

EPS = {"example1_q2": 0.01, "example1_q3": 0.01, "example1_q4": 0.0496,
       "example2": 0.02, "example3": 25.0}
TIME_LIMIT = {"example1_q2": 60.0, "example2": 600.0, "example3": 600.0}
TRACE_CUTS = {"example1_q2": 400, "example1_q3": 90, "example2": 250}
SLACK = 0.3
TOL_SANDWICH = 1e-6


@functools.lru_cache(maxsize=None)
def solved(name, norm="l2"):
    inst = builtin(name).with_norm(norm)
    t0 = time.perf_counter()
    res = run(inst, RunConfig(epsilon=EPS[name], threads=1))
    return inst, res, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def traced(name, n_cuts, norm="l2"):
    inst = builtin(name).with_norm(norm)
    return inst, run(inst, RunConfig.indefinite(n_cuts, track_hausdorff=True, threads=1))


def sandwich_check(name, norm="l2"):
    inst, res, secs = solved(name, norm)
    eps = EPS[name]
    d = sandwich_distances(res, inst, tol=eps + TOL_SANDWICH)
    ok = res.status is Status.CONVERGED and d.max() <= eps + TOL_SANDWICH
    return ok, secs, float(d.max())


def h_sequence_error(name, norm="l2", n=100):
    inst, res = traced(name, TRACE_CUTS.get(name, 250) if norm == "l2" else 250, norm)
    worst = 0.0
    for r in res.log[:n]:
        worst = max(worst, abs(r.hausdorff_consecutive - r.max_dist) / (1 + r.max_dist))
    return worst, len(res.log[:n])


def slope_check(name, norm="l2"):
    inst, res = traced(name, TRACE_CUTS.get(name, 250) if norm == "l2" else 250, norm)
    fit = fit_slope(res.log, 0.2)
    target = theoretical_exponent(inst.q, norm == "l2")
    return fit.slope <= target + SLACK, fit.slope, target


def duality_check(inst, n=50, seed=0):
    rng = np.random.default_rng(seed)
    state = initialize(inst, RunConfig(epsilon=1.0))
    G = np.array([inst.gamma_map(x) for x in inst.sample_feasible(200, rng)])
    lo, span = G.min(0), np.ptp(G, axis=0) + 1e-9
    worst_gap = worst_norm = worst_align = 0.0
    done = 0
    while done < n:
        v = lo - 0.5 * span + 1.5 * rng.random(inst.q) * span
        if state.w_bar @ v > state.gamma:
            continue
        s = solve_modified(inst, v, state.gamma, state.w_bar)
        d = dual_value(inst, v, s.w, s.lam, state.gamma, state.w_bar)
        worst_gap = max(worst_gap, (s.objective_value - d) / (1 + abs(s.objective_value)))
        if s.objective_value > 1e-5:
            worst_norm = max(worst_norm, abs(dual_norm_eval(inst.norm, s.w_tilde) - 1))
            worst_align = max(worst_align, abs(s.objective_value - s.w_tilde @ s.z) / (1 + s.objective_value))
        done += 1
    ok = worst_gap <= 1e-6 and worst_norm <= 1e-6 and worst_align <= 1e-6
    return ok, worst_gap, worst_norm, worst_align


def cut_validity(inst, res, n=500, seed=1):
    X = inst.sample_feasible(n, np.random.default_rng(seed))
    Y = np.array([inst.gamma_map(x) for x in X])
    scale = 1.0 + float(np.abs(res.vertices.vertices).max())
    viol = outer_violation(res.outer.halfspaces, Y, inst.norm)
    return viol <= 1e-6 * scale, viol, scale


# --- criteria -----------------------------------------------------------------------------------

def test_criterion_1_sandwich(acceptance):
    parts, ok_all = [], True
    for name in ("example1_q2", "example2", "example3"):
        ok, secs, dmax = sandwich_check(name)
        ok = ok and secs < TIME_LIMIT[name]
        ok_all &= ok
        parts.append(f"{name} eps={EPS[name]:g} max={dmax:.4g} {secs:.0f}s")
    acceptance(1, ok_all, "; ".join(parts))
    assert ok_all, parts


def test_criterion_2_analytic_oracle(acceptance):
    inst = builtin("example1_q2")
    s = solve_norm_min(inst, [0.0, 0.0])
    err_d = abs(s.objective_value - (np.sqrt(2) - 1))
    cfg = RunConfig(epsilon=0.01)
    _, _, cut = step(initialize(inst, cfg), inst, cfg)
    err_n = float(np.abs(cut.halfspace.normal - np.ones(2) / np.sqrt(2)).max())
    ok = err_d <= 1e-6 and err_n <= 1e-6
    acceptance(2, ok, f"|d - (sqrt2 - 1)| = {err_d:.2e}, first normal error {err_n:.2e}")
    assert ok


def test_criterion_3_finiteness(acceptance):
    parts, ok_all = [], True
    for name in sorted(BUILTINS):
        _, res, secs = solved(name)
        ok = res.status is Status.CONVERGED and res.k < 100_000
        ok_all &= ok
        parts.append(f"{name}: {res.k} cuts")
    acceptance(3, ok_all, ", ".join(parts))
    assert ok_all, parts


def test_criterion_4_h_sequence(acceptance):
    parts, ok_all = [], True
    for name in ("example1_q2", "example2"):
        worst, n = h_sequence_error(name)
        ok = worst <= 1e-5 and n == 100
        ok_all &= ok
        parts.append(f"{name} worst rel err {worst:.2e} over {n} cuts")
    acceptance(4, ok_all, "; ".join(parts))
    assert ok_all, parts


def test_criterion_5_exponent(acceptance):
    parts, ok_all = [], True
    for name in ("example1_q2", "example1_q3", "example2"):
        ok, slope, target = slope_check(name)
        ok_all &= ok
        parts.append(f"{name} slope {slope:.3f} <= {target + SLACK:.2f}")
    acceptance(5, ok_all, "; ".join(parts))
    assert ok_all, parts


def test_criterion_6_duality(acceptance):
    parts, ok_all = [], True
    for i, name in enumerate(sorted(BUILTINS)):
        ok, gap, nrm, al = duality_check(builtin(name), seed=i)
        ok_all &= ok
        parts.append(f"{name} gap {gap:.1e}")
    acceptance(6, ok_all, "; ".join(parts))
    assert ok_all, parts


def test_criterion_7_cut_validity(acceptance):
    parts, ok_all = [], True
    for name in sorted(BUILTINS):
        inst, res, _ = solved(name)
        ok, viol, scale = cut_validity(inst, res)
        ok_all &= ok
        parts.append(f"{name} viol {viol:.1e}")
    acceptance(7, ok_all, "; ".join(parts))
    assert ok_all, parts


def _random_polytope_check(rng):
    q = int(rng.integers(2, 5))
    lo, hi = -rng.uniform(0.5, 2), rng.uniform(0.5, 2)
    eye = np.eye(q)
    p = HPolytope([Halfspace(e, lo) for e in eye] + [Halfspace(-e, -hi) for e in eye])
    v = enumerate_brute(p)
    n_rows = min(12, 2 * q + int(rng.integers(1, 7)))
    while len(p) < n_rows:
        w = rng.normal(size=q)
        if rng.random() < 0.25:
            off = w @ v.vertices[rng.integers(len(v))]
        else:
            off = w @ (rng.dirichlet(np.ones(len(v))) @ v.vertices)
        v, p = cut_update(v, p, Halfspace(w, float(off)))
    return match_vertex_sets(v.vertices, enumerate_brute(p).vertices)


def _lemma_pair_check(rng):
    q = int(rng.integers(2, 4))
    V = rng.normal(size=(int(rng.integers(q + 2, 9)), q))
    # random pointed cone: generators near the positive orthant
    G = np.eye(q) + 0.3 * rng.random((q, q))
    # lifted H-rep of conv V + C: hull facets of V plus far translates whose inner normal lies in C+
    far = np.vstack([V + 50.0 * g for g in G])
    hull = ConvexHull(np.vstack([V, far]))
    rows = [Halfspace(-eq[:-1], eq[-1]) for eq in hull.equations if np.all(G @ -eq[:-1] >= -1e-9)]
    ext = enumerate_brute(HPolytope(rows), require_bounded=False).vertices
    ext_a = V[ConvexHull(V).vertices]
    return len(ext) > 0 and all(np.min(np.abs(ext_a - y).max(axis=1)) <= 1e-7 for y in ext)


def test_criterion_8_vertex_enumeration(acceptance):
    rng = np.random.default_rng(2024)
    worst = max(_random_polytope_check(rng) for _ in range(200))
    lemma_ok = sum(_lemma_pair_check(rng) for _ in range(100))
    ok = worst <= 1e-8 and lemma_ok == 100
    acceptance(8, ok, f"200 polytopes, worst vertex mismatch {worst:.1e}; subset property {lemma_ok}/100")
    assert ok


def test_criterion_9_membership(acceptance):
    rng = np.random.default_rng(9)
    wrong, total = 0, 0
    for name in sorted(BUILTINS):
        inst = builtin(name)
        G = np.array([inst.gamma_map(x) for x in inst.sample_feasible(200, rng)])
        span = float(np.ptp(G, axis=0).max())
        gens = inst.cone.primal_generators
        for x in inst.sample_feasible(10, rng):
            y = inst.gamma_map(x) + rng.random(len(gens)) @ gens * rng.uniform(0, span) * rng.integers(0, 2)
            wrong += solve_norm_min(inst, y).objective_value > 1e-6
            total += 1
        for _ in range(10):
            v = G.min(0) - rng.uniform(0.1, 1.0, inst.q) * span
            s = solve_norm_min(inst, v)
            w = s.w_tilde / dual_norm_eval(inst.norm, s.w_tilde)
            # strictly outside the supporting halfspace through y, hence outside P
            p = s.y - rng.uniform(1e-3, 0.5) * span * w / (w @ w)
            assert w @ p < w @ s.y
            wrong += solve_norm_min(inst, p).objective_value <= 1e-6
            total += 1
    ok = wrong == 0 and total == 100
    acceptance(9, ok, f"{wrong} misclassified of {total}")
    assert ok


def test_criterion_10_norm_generality(acceptance):
    parts, ok_all = [], True
    for norm in ("l1", "linf"):
        inst = builtin("example2").with_norm(norm)
        ok1, secs, dmax = sandwich_check("example2", norm)
        worst, n = h_sequence_error("example2", norm)
        ok4 = worst <= 1e-5 and n == 100
        ok6, gap, _, _ = duality_check(inst, seed=7)
        _, res, _ = solved("example2", norm)
        ok7, viol, _ = cut_validity(inst, res)
        ok5, slope, target = slope_check("example2", norm)
        ok = ok1 and ok4 and ok6 and ok7 and ok5
        ok_all &= ok
        flags = "".join(f"{c}{'+' if f else '-'}" for c, f in
                        (("1", ok1), ("4", ok4), ("6", ok6), ("7", ok7), ("5", ok5)))
        parts.append(f"{norm}: [{flags}] max={dmax:.4g} hseq {worst:.1e} slope {slope:.3f} <= {target + SLACK:.2f}")
    acceptance(10, ok_all, "; ".join(parts))
    assert ok_all, parts
