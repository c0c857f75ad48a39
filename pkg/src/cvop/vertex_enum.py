"""Vertex enumeration for bounded H-polytopes, by brute force and by incremental cuts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .geometry import Halfspace

TOL_FEAS = 1e-9
TOL_ACT = 1e-9
TOL_DEDUP = 1e-8
TOL_PIVOT = 1e-10


class PolytopeError(ValueError):
    pass


class EmptyPolytopeError(PolytopeError):
    pass


class UnboundedPolytopeError(PolytopeError):
    pass


@dataclass
class HPolytope:
    """Intersection of halfspaces ``{y : A y >= b}``; rows are kept in insertion order."""

    halfspaces: list[Halfspace] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.halfspaces[0].dim

    def __len__(self) -> int:
        return len(self.halfspaces)

    @property
    def A(self) -> np.ndarray:
        return np.array([h.normal for h in self.halfspaces])

    @property
    def b(self) -> np.ndarray:
        return np.array([h.offset for h in self.halfspaces])

    def unit_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows rescaled to unit Euclidean normal."""
        A, b = self.A, self.b
        s = np.linalg.norm(A, axis=1)
        return A / s[:, None], b / s

    def appended(self, h: Halfspace) -> "HPolytope":
        return HPolytope(self.halfspaces + [h])

    def contains(self, y, tol: float = TOL_FEAS) -> bool:
        A, b = self.unit_rows()
        return bool(np.all(A @ np.asarray(y, dtype=float) - b >= -tol))


@dataclass
class VRep:
    """Vertex list plus, per vertex, the indices of the halfspaces active there."""

    vertices: np.ndarray
    incidence: list[frozenset]

    def __len__(self) -> int:
        return len(self.incidence)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def scale(self) -> float:
        return 1.0 + float(np.abs(self.vertices).max()) if len(self) else 1.0

    def sorted(self) -> "VRep":
        order = np.lexsort(self.vertices.T[::-1])
        return VRep(self.vertices[order], [self.incidence[i] for i in order])


def rank(M: np.ndarray, tol: float = TOL_PIVOT) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    A = np.array(M, dtype=float, copy=True)
    if A.size == 0:
        return 0
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[p, c]) <= tol:
            continue
        A[[r, p]] = A[[p, r]]
        A[r + 1:] -= np.outer(A[r + 1:, c] / A[r, c], A[r])
        r += 1
    return r


def _dedup(points: np.ndarray, incid: list[set], scale: float, tol: float):
    keep_pts, keep_inc = [], []
    for p, inc in zip(points, incid):
        for j, k in enumerate(keep_pts):
            if np.max(np.abs(p - k)) / scale <= tol:
                keep_inc[j] |= inc
                break
        else:
            keep_pts.append(p)
            keep_inc.append(set(inc))
    return keep_pts, keep_inc


def enumerate_brute(p: HPolytope, tol_feas: float = TOL_FEAS, tol_act: float = TOL_ACT,
                    tol_dedup: float = TOL_DEDUP, require_bounded: bool = True) -> VRep:
    """All vertices of ``p`` by solving every q-subset of boundary equations.

    Raises EmptyPolytopeError when no vertex exists and UnboundedPolytopeError when the
    recession cone is nontrivial (unless ``require_bounded`` is False, in which case the
    vertices of a pointed unbounded polyhedron are returned).
    """
    A, b = p.unit_rows()
    m, q = A.shape
    if require_bounded and not is_bounded(p):
        raise UnboundedPolytopeError("polyhedron has a nonzero recession direction")
    pts, inc = [], []
    for idx in itertools.combinations(range(m), q):
        M = A[list(idx)]
        if rank(M) < q:
            continue
        y = np.linalg.solve(M, b[list(idx)])
        scale = 1.0 + np.abs(y).max()
        s = A @ y - b
        if np.all(s >= -tol_feas * scale):
            pts.append(y)
            inc.append(set(np.flatnonzero(np.abs(s) <= tol_act * scale).tolist()))
    if not pts:
        raise EmptyPolytopeError("polytope has no vertices (empty or infeasible system)")
    scale = 1.0 + max(np.abs(y).max() for y in pts)
    pts, inc = _dedup(np.array(pts), inc, scale, tol_dedup)
    return VRep(np.array(pts), [frozenset(s) for s in inc]).sorted()


def is_bounded(p: HPolytope) -> bool:
    """True iff ``{d : A d >= 0} = {0}``, checked by enumerating that cone capped by the unit box."""
    A, _ = p.unit_rows()
    q = A.shape[1]
    eye = np.eye(q)
    rows = [Halfspace(a, 0.0) for a in A]
    rows += [Halfspace(e, -1.0) for e in eye] + [Halfspace(-e, -1.0) for e in eye]
    capped = enumerate_brute(HPolytope(rows), require_bounded=False)
    return bool(np.abs(capped.vertices).max() <= 1e-9)


def cut_update(v: VRep, p: HPolytope, h: Halfspace, tol_act: float = TOL_ACT,
               tol_dedup: float = TOL_DEDUP) -> tuple[VRep, HPolytope]:
    """V-representation of ``p`` intersected with ``h``.

    Vertices strictly inside ``h`` are kept, vertices on its boundary are kept with the new
    row added to their incidence, and every edge from an inside to an outside vertex
    contributes its crossing point. Edges are detected combinatorially: two vertices are
    adjacent iff their common active normals have rank q - 1.
    """
    q = v.dim
    new_index = len(p)
    p_new = p.appended(h)
    unit = h.normal / np.linalg.norm(h.normal)
    off = h.offset / np.linalg.norm(h.normal)
    scale = v.scale()
    s = v.vertices @ unit - off
    inside = s > tol_act * scale
    on = np.abs(s) <= tol_act * scale
    out = s < -tol_act * scale
    if not out.any():
        inc = [i | {new_index} if on[k] else i for k, i in enumerate(v.incidence)]
        return VRep(v.vertices.copy(), inc), p_new
    if not (inside.any() or on.any()):
        raise EmptyPolytopeError("cut removes every vertex")

    A, _ = p.unit_rows()
    pts = [v.vertices[k] for k in np.flatnonzero(~out)]
    inc = [set(v.incidence[k]) | ({new_index} if on[k] else set()) for k in np.flatnonzero(~out)]
    new_pts, new_inc = [], []
    in_idx = np.flatnonzero(inside)
    for o in np.flatnonzero(out):
        io = v.incidence[o]
        for i in in_idx:
            common = io & v.incidence[i]
            if len(common) < q - 1:
                continue
            if rank(A[sorted(common)]) != q - 1:
                continue
            lam = s[i] / (s[i] - s[o])
            new_pts.append(v.vertices[i] + lam * (v.vertices[o] - v.vertices[i]))
            new_inc.append(set(common) | {new_index})
    if new_pts:
        new_pts, new_inc = _dedup(np.array(new_pts), new_inc, scale, tol_dedup)
        # a crossing point can coincide with a retained boundary vertex
        for y, ic in zip(new_pts, new_inc):
            for j, k in enumerate(pts):
                if np.max(np.abs(y - k)) / scale <= tol_dedup:
                    inc[j] |= ic
                    break
            else:
                pts.append(y)
                inc.append(ic)
    return VRep(np.array(pts), [frozenset(i) for i in inc]).sorted(), p_new


def match_vertex_sets(a: np.ndarray, b: np.ndarray) -> float:
    """Largest coordinate deviation under the optimal one-to-one pairing (inf if sizes differ)."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if a.shape != b.shape:
        return np.inf
    cost = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())
