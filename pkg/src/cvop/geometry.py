"""Norms, halfspaces and polyhedral ordering cones."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TOL_CONE = 1e-9


class NormSpec(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, name: "str | NormSpec") -> "NormSpec":
        if isinstance(name, NormSpec):
            return name
        key = str(name).strip().lower()
        aliases = {"l1": cls.L1, "1": cls.L1, "l2": cls.L2, "2": cls.L2,
                   "linf": cls.LINF, "inf": cls.LINF, "l_inf": cls.LINF}
        if key not in aliases:
            raise ValueError(f"unknown norm {name!r}; expected one of l1, l2, linf")
        return aliases[key]

    @property
    def dual(self) -> "NormSpec":
        return {NormSpec.L1: NormSpec.LINF,
                NormSpec.L2: NormSpec.L2,
                NormSpec.LINF: NormSpec.L1}[self]

    @property
    def order(self) -> float:
        return {NormSpec.L1: 1, NormSpec.L2: 2, NormSpec.LINF: np.inf}[self]


def norm_eval(spec: NormSpec, z) -> float:
    """Value of the norm ``spec`` at ``z``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        return 0.0
    if spec is NormSpec.L2:
        # scale first so tiny or huge entries do not under/overflow when squared
        s = float(np.abs(z).max())
        return s * float(np.linalg.norm(z / s)) if s > 0 else 0.0
    return float(np.linalg.norm(z, ord=spec.order))


def dual_norm_eval(spec: NormSpec, w) -> float:
    """Value of the dual norm of ``spec`` at ``w``."""
    return norm_eval(spec.dual, w)


@dataclass(frozen=True)
class Halfspace:
    """The closed halfspace ``{y : normal @ y >= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        w = np.array(self.normal, dtype=float).ravel()
        if not np.any(w != 0.0):
            raise ValueError("halfspace normal must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "normal", w)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, normal, point) -> "Halfspace":
        """Halfspace with the given normal whose boundary passes through ``point``."""
        w = np.asarray(normal, dtype=float)
        return cls(w, float(w @ np.asarray(point, dtype=float)))

    @property
    def dim(self) -> int:
        return self.normal.size

    def slack(self, y) -> np.ndarray:
        """``normal @ y - offset``; nonnegative inside. Accepts one point or a stack."""
        return np.asarray(y, dtype=float) @ self.normal - self.offset

    def contains(self, y, tol: float = 0.0) -> bool:
        return bool(np.all(self.slack(y) >= -tol))


def shifted_halfspace(h: Halfspace, eps: float, spec: NormSpec = NormSpec.L2,
                      tol: float = 1e-12) -> Halfspace:
    """Relax ``h`` by ``eps / 2`` in offset.

    For ``||h.normal||_* <= 1`` the result contains ``h + B_{eps/2}(0)`` by Hoelder.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if dual_norm_eval(spec, h.normal) > 1.0 + tol:
        raise ValueError("normal must have dual norm at most 1")
    return Halfspace(h.normal, h.offset - 0.5 * eps)


@dataclass(frozen=True)
class PolyCone:
    """Polyhedral ordering cone given by generators of C and of its dual C+.

    Dual generators are rescaled to unit dual norm under ``norm``.
    """

    dual_generators: np.ndarray
    primal_generators: np.ndarray
    norm: NormSpec = NormSpec.L2
    tol: float = TOL_CONE
    w_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = np.atleast_2d(np.array(self.dual_generators, dtype=float))
        Cg = np.atleast_2d(np.array(self.primal_generators, dtype=float))
        norm = NormSpec.parse(self.norm)
        J, q = W.shape
        if Cg.shape[1] != q:
            raise ValueError(f"generators have dimension {Cg.shape[1]}, dual generators {q}")
        if J < q:
            raise ValueError(f"need at least q={q} dual generators for a solid dual cone, got {J}")
        scales = np.array([dual_norm_eval(norm, w) for w in W])
        if np.any(scales == 0):
            raise ValueError("dual generator equal to zero")
        W = W / scales[:, None]
        if np.linalg.matrix_rank(W) < q:
            raise ValueError("dual generators do not span R^q (cone C is not pointed)")
        if np.any(np.all(Cg == 0, axis=1)):
            raise ValueError("primal generator equal to zero")
        Cg = Cg / np.linalg.norm(Cg, axis=1)[:, None]
        if np.min(W @ Cg.T) < -self.tol:
            raise ValueError("a generator of C violates a dual generator inequality")
        s = W.sum(axis=0)
        w_bar = s / dual_norm_eval(norm, s)
        if np.min(Cg @ w_bar) <= 0:
            raise ValueError("cone is not pointed: sum of dual generators not in Int C+")
        for arr in (W, Cg, w_bar):
            arr.setflags(write=False)
        object.__setattr__(self, "dual_generators", W)
        object.__setattr__(self, "primal_generators", Cg)
        object.__setattr__(self, "norm", norm)
        object.__setattr__(self, "w_bar", w_bar)

    @classmethod
    def orthant(cls, q: int, norm: NormSpec = NormSpec.L2) -> "PolyCone":
        eye = np.eye(q)
        return cls(eye, eye, norm)

    @property
    def q(self) -> int:
        return self.dual_generators.shape[1]

    @property
    def J(self) -> int:
        return self.dual_generators.shape[0]

    def interior_direction(self) -> np.ndarray:
        """A unit vector in Int C (sum of the extreme rays)."""
        c = self.primal_generators.sum(axis=0)
        return c / np.linalg.norm(c)

    def in_dual(self, w, tol: float | None = None) -> bool:
        """Whether ``w`` lies in C+ (tested against the generators of C)."""
        tol = self.tol if tol is None else tol
        w = np.asarray(w, dtype=float)
        return bool(np.all(self.primal_generators @ w >= -tol * max(1.0, np.abs(w).max())))

    def with_norm(self, norm: NormSpec) -> "PolyCone":
        return PolyCone(self.dual_generators, self.primal_generators, norm, self.tol)


def cone_contains(cone: PolyCone, y, tol: float = TOL_CONE) -> bool:
    """Membership of ``y`` in C, via ``w_j @ y >= -tol`` for every dual generator."""
    return bool(np.all(cone.dual_generators @ np.asarray(y, dtype=float) >= -tol))
