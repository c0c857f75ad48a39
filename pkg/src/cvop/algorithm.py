"""Outer approximation of the upper image by norm-minimizing scalarizations and cuts."""

from __future__ import annotations

import enum
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import Halfspace, NormSpec, dual_norm_eval
from .metrics import IterationRecord, hausdorff_after_cut
from .problem import CvopInstance
from .scalarization import (TOL_ZERO, PrimalDualSolution, SolverConfig, SolverError,
                            solve_modified, solve_norm_min, solve_weighted_sum)
from .vertex_enum import (HPolytope, UnboundedPolytopeError, VRep, cut_update,
                          enumerate_brute)

log = logging.getLogger(__name__)

KEY_DIGITS = 12


class Mode(enum.Enum):
    TERMINATE = "terminate"
    INDEFINITE = "indefinite"


class Status(enum.Enum):
    CONVERGED = "converged"
    CUTS_DONE = "cuts_done"
    POLYHEDRAL = "polyhedral upper image reached"
    CAP = "iteration cap reached"


class StepOutcome(enum.Enum):
    CUT = "cut_applied"
    CONVERGED = "converged"
    POLYHEDRAL = "polyhedral"


@dataclass(frozen=True)
class RunConfig:
    epsilon: float
    max_iters: int = 100_000
    mode: Mode = Mode.TERMINATE
    n_cuts: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    threads: int = 1
    track_hausdorff: bool = False
    keep_history: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        mode = Mode(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is Mode.INDEFINITE and (self.n_cuts is None or self.n_cuts < 1):
            raise ValueError("indefinite mode needs n_cuts >= 1")
        if self.max_iters < 1 or self.threads < 1:
            raise ValueError("max_iters and threads must be at least 1")

    @classmethod
    def indefinite(cls, n_cuts: int, epsilon: float = 1e-12, **kw) -> "RunConfig":
        return cls(epsilon=epsilon, mode=Mode.INDEFINITE, n_cuts=n_cuts, **kw)


@dataclass
class Cut:
    k: int
    vertex: np.ndarray
    halfspace: Halfspace
    distance: float
    solution: PrimalDualSolution


@dataclass
class AlgoState:
    k: int
    hpoly: HPolytope
    vrep: VRep
    minimizers: list[np.ndarray]
    images: list[np.ndarray]
    v_known: dict
    v_known2: dict
    gamma: float
    w_bar: np.ndarray
    beta: float
    key_scale: float
    n_initial_rows: int
    log: list[IterationRecord] = field(default_factory=list)
    cuts: list[Cut] = field(default_factory=list)
    history: list[VRep] = field(default_factory=list)

    def key(self, v) -> tuple:
        return tuple(np.round(np.asarray(v) / self.key_scale, KEY_DIGITS) + 0.0)

    def add_minimizer(self, x, y):
        self.minimizers.append(np.asarray(x, dtype=float))
        self.images.append(np.asarray(y, dtype=float))


@dataclass
class SolveResult:
    status: Status
    minimizers: np.ndarray
    images: np.ndarray
    outer: HPolytope
    vertices: VRep
    log: list[IterationRecord]
    gamma: float
    w_bar: np.ndarray
    beta: float
    epsilon: float
    cuts: list[Cut]
    state: AlgoState

    @property
    def k(self) -> int:
        return self.state.k


def _default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def initialize(inst: CvopInstance, cfg: RunConfig) -> AlgoState:
    """Weighted-sum solves per dual generator, the initial polyhedron and the S(gamma) cap."""
    cone = inst.cone
    W = cone.dual_generators
    xs, ys, rows = [], [], []
    for wj in W:
        res = solve_weighted_sum(inst, wj, cfg.solver)
        xs.append(res.x)
        ys.append(inst.gamma_map(res.x))
        # the certified lower bound keeps the row valid for the whole upper image
        rows.append(Halfspace(wj, res.lower_bound))
    p0 = HPolytope(rows)
    v0 = enumerate_brute(p0, require_bounded=False)

    w_bar = cone.w_bar
    beta = inst.compute_beta()
    excess = max(0.0, float(np.max(v0.vertices @ w_bar - beta)))
    dists = [solve_norm_min(inst, v, cfg.solver).objective_value for v in v0.vertices]
    margin = max(1e-6 * (1.0 + abs(beta)), 1e-9)
    gamma = beta + excess + max(dists) + margin
    log.info("gamma = %.6g (beta %.6g, excess %.3g, delta_H(P0, P) %.6g)", gamma, beta, excess, max(dists))

    hpoly = p0.appended(Halfspace(-w_bar, -gamma))
    try:
        vrep = enumerate_brute(hpoly, require_bounded=True)
    except UnboundedPolytopeError as exc:
        raise UnboundedPolytopeError("initial outer polytope is unbounded; the problem is not a "
                                     "bounded instance for this ordering cone") from exc
    state = AlgoState(k=0, hpoly=hpoly, vrep=vrep, minimizers=[], images=[], v_known={}, v_known2={},
                      gamma=gamma, w_bar=w_bar, beta=beta, key_scale=vrep.scale(),
                      n_initial_rows=len(hpoly))
    for x, y in zip(xs, ys):
        state.add_minimizer(x, y)
    if cfg.keep_history:
        state.history.append(vrep)
    return state


def _solve_all(inst, state: AlgoState, todo: list[np.ndarray], cfg: RunConfig) -> list[PrimalDualSolution]:
    def one(v):
        return solve_modified(inst, v, state.gamma, state.w_bar, cfg.solver)

    if cfg.threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, todo))
    return [one(v) for v in todo]


def step(state: AlgoState, inst: CvopInstance, cfg: RunConfig) -> tuple[AlgoState, StepOutcome, Cut | None]:
    """One pass over the current vertices followed by at most one cut."""
    t0 = time.perf_counter()
    V = state.vrep.vertices
    keys = [state.key(v) for v in V]
    todo = [i for i, key in enumerate(keys) if key not in state.v_known and key not in state.v_known2]
    sols = _solve_all(inst, state, [V[i] for i in todo], cfg)
    for i, sol in zip(todo, sols):
        if sol.objective_value <= cfg.epsilon:
            state.add_minimizer(sol.x, inst.gamma_map(sol.x))
            state.v_known[keys[i]] = sol
        else:
            state.v_known2[keys[i]] = sol

    dist = np.array([(state.v_known.get(key) or state.v_known2[key]).objective_value for key in keys])
    # vertices are sorted lexicographically, so the first maximizer is the tie-break winner
    j = int(np.argmax(dist))
    best = float(dist[j])
    rec = IterationRecord(k=state.k, max_dist=best, n_vertices=len(V), n_solves=len(todo),
                          n_cache_hits=len(V) - len(todo), hausdorff_outer_to_upper=best)
    state.log.append(rec)

    if cfg.mode is Mode.INDEFINITE:
        if best <= TOL_ZERO:
            rec.wall_time = time.perf_counter() - t0
            return state, StepOutcome.POLYHEDRAL, None
    elif best <= cfg.epsilon:
        rec.wall_time = time.perf_counter() - t0
        return state, StepOutcome.CONVERGED, None

    sol = state.v_known.get(keys[j]) or state.v_known2[keys[j]]
    normal = sol.unit_normal(inst.norm)
    h = Halfspace.through(normal, sol.y)
    prev = state.vrep
    state.vrep, state.hpoly = cut_update(prev, state.hpoly, h)
    if cfg.track_hausdorff:
        rec.hausdorff_consecutive = hausdorff_after_cut(prev, state.hpoly, state.vrep, inst.norm, cfg.solver)
    cut = Cut(state.k, V[j].copy(), h, best, sol)
    state.cuts.append(cut)
    if cfg.keep_history:
        state.history.append(state.vrep)
    state.k += 1
    rec.wall_time = time.perf_counter() - t0
    log.debug("k=%d |z|=%.6g vertices=%d solves=%d", rec.k, best, rec.n_vertices, rec.n_solves)
    return state, StepOutcome.CUT, cut


def run(inst: CvopInstance, cfg: RunConfig, state: AlgoState | None = None) -> SolveResult:
    """Run the cutting loop until convergence, the requested number of cuts, or the cap."""
    if state is None:
        state = initialize(inst, cfg)
    status = Status.CAP
    while True:
        if cfg.mode is Mode.INDEFINITE and len(state.cuts) >= cfg.n_cuts:
            status = Status.CUTS_DONE
            break
        if state.k >= cfg.max_iters:
            status = Status.CAP
            log.warning("iteration cap %d reached", cfg.max_iters)
            break
        state, outcome, _ = step(state, inst, cfg)
        if outcome is StepOutcome.CONVERGED:
            status = Status.CONVERGED
            break
        if outcome is StepOutcome.POLYHEDRAL:
            status = Status.POLYHEDRAL
            break
    return SolveResult(status, np.array(state.minimizers), np.array(state.images), state.hpoly,
                       state.vrep, state.log, state.gamma, state.w_bar, state.beta, cfg.epsilon,
                       state.cuts, state)


def sandwich_distances(result: SolveResult, inst: CvopInstance, norm: NormSpec | None = None,
                       cfg: SolverConfig = SolverConfig(), tol: float | None = None,
                       n_near: int = 8) -> np.ndarray:
    """Distance of every final outer vertex to conv Gamma(X) + C for the returned minimizers.

    With ``tol`` given, each vertex is first projected onto a small candidate hull (the
    image of the minimizer found at that vertex plus its ``n_near`` nearest images) plus C.
    That distance bounds the true one from above; the full hull is used only when the bound
    exceeds ``tol``. Without ``tol`` every distance is exact.
    """
    from .scalarization import project_onto_polytope

    norm = inst.norm if norm is None else norm
    pts = np.unique(np.round(result.images, 14), axis=0)
    known = result.state.v_known
    out = []
    for v in result.vertices.vertices:
        if tol is not None and len(pts) > n_near:
            cand = [pts[i] for i in np.argsort(np.linalg.norm(pts - v, axis=1))[:n_near]]
            sol = known.get(result.state.key(v))
            if sol is not None:
                cand.append(inst.gamma_map(sol.x))
            d = project_onto_polytope(v, np.array(cand), inst.cone, norm, cfg).dist
            if d <= tol:
                out.append(d)
                continue
        out.append(project_onto_polytope(v, pts, inst.cone, norm, cfg).dist)
    return np.array(out)


def outer_violation(halfspaces, images, norm: NormSpec) -> float:
    """Largest violation of the given halfspaces by the sample images (0 if all contained)."""
    Y = np.atleast_2d(images)
    worst = 0.0
    for h in halfspaces:
        s = dual_norm_eval(norm, h.normal)
        worst = max(worst, float(np.max(-(Y @ h.normal - h.offset) / s)))
    return worst


__all__ = ["Mode", "Status", "StepOutcome", "RunConfig", "AlgoState", "Cut", "SolveResult",
           "initialize", "step", "run", "sandwich_distances", "outer_violation", "SolverError"]
