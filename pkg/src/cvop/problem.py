"""Convex vector optimization instances: expressions, validation, TOML problem files."""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import tomli
import tomli_w

from .geometry import NormSpec, PolyCone

PSD_TOL = 1e-9
SMOOTH_DELTA = 1e-9


class ProblemError(ValueError):
    """Parse or validation failure; ``line`` points into the problem file when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class OracleEval(NamedTuple):
    value: float
    gradient: np.ndarray


def _vec(x, name="vector") -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim != 1:
        raise ProblemError(f"{name} must be a flat list of numbers")
    return a


@functools.lru_cache(maxsize=None)
def _zeros(n: int) -> np.ndarray:
    z = np.zeros((n, n))
    z.setflags(write=False)
    return z


@functools.lru_cache(maxsize=None)
def _eye2(n: int) -> np.ndarray:
    e = 2.0 * np.eye(n)
    e.setflags(write=False)
    return e


class ConvexExpr:
    """A scalar convex function of x with gradient and Hessian."""

    kind: str = ""

    def value(self, x) -> float:
        return self.evaluate(np.asarray(x, dtype=float))[0]

    def gradient(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))[1]

    def evaluate(self, x: np.ndarray, delta: float = SMOOTH_DELTA) -> tuple[float, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def smooth_value(self, x: np.ndarray, delta: float = SMOOTH_DELTA) -> float:
        """The value ``evaluate`` would return, without derivatives."""
        return self.evaluate(x, delta)[0]

    def box_max(self, lower: np.ndarray, upper: np.ndarray) -> float:
        """Supremum over a finite box; convexity puts it at a corner."""
        corners = itertools.product(*zip(lower, upper))
        return max(self.value(np.array(c)) for c in corners)

    def to_record(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and _records_equal(self.to_record(), other.to_record())

    def __hash__(self):
        return id(self)


def _records_equal(a, b) -> bool:
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_records_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return isinstance(b, (list, tuple)) and len(a) == len(b) and all(map(_records_equal, a, b))
    return a == b


class Affine(ConvexExpr):
    kind = "affine"

    def __init__(self, c, d=0.0):
        self.c = _vec(c, "affine c")
        self.d = float(d)

    @property
    def n(self):
        return self.c.size

    def evaluate(self, x, delta=SMOOTH_DELTA):
        return float(self.c @ x + self.d), self.c, _zeros(self.n)

    def smooth_value(self, x, delta=SMOOTH_DELTA):
        return float(self.c @ x + self.d)

    def to_record(self):
        return {"kind": self.kind, "c": self.c.tolist(), "d": self.d}


class Quadratic(ConvexExpr):
    """``x @ Q @ x + b @ x + d`` with Q symmetric positive semidefinite."""

    kind = "quadratic"

    def __init__(self, Q, b, d=0.0):
        Q = np.array(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ProblemError("quadratic Q must be a square matrix")
        if not np.allclose(Q, Q.T, atol=1e-12, rtol=1e-12):
            raise ProblemError("quadratic Q must be symmetric")
        eig = np.linalg.eigvalsh(Q)
        if eig.min() < -PSD_TOL:
            raise ProblemError(f"quadratic Q is not positive semidefinite (eigenvalue {eig.min():.3g})")
        self.Q = Q
        self.b = _vec(b, "quadratic b")
        if self.b.size != Q.shape[0]:
            raise ProblemError("quadratic b has the wrong length")
        self.d = float(d)
        self._hess = 2 * Q
        self._hess.setflags(write=False)

    @property
    def n(self):
        return self.b.size

    def evaluate(self, x, delta=SMOOTH_DELTA):
        Qx = self.Q @ x
        return float(x @ Qx + self.b @ x + self.d), 2 * Qx + self.b, self._hess

    def smooth_value(self, x, delta=SMOOTH_DELTA):
        return float(x @ (self.Q @ x) + self.b @ x + self.d)

    def to_record(self):
        return {"kind": self.kind, "Q": self.Q.tolist(), "b": self.b.tolist(), "d": self.d}


class SqDist(ConvexExpr):
    """``||x - center||_2^2``."""

    kind = "sq_dist"

    def __init__(self, center):
        self.center = _vec(center, "sq_dist center")

    @property
    def n(self):
        return self.center.size

    def evaluate(self, x, delta=SMOOTH_DELTA):
        r = x - self.center
        return float(r @ r), 2 * r, _eye2(self.n)

    def smooth_value(self, x, delta=SMOOTH_DELTA):
        r = x - self.center
        return float(r @ r)

    def box_max(self, lower, upper):
        far = np.maximum(np.abs(lower - self.center), np.abs(upper - self.center))
        return float(far @ far)

    def to_record(self):
        return {"kind": self.kind, "center": self.center.tolist()}


class Norm2(ConvexExpr):
    """``||x - center||_2``.

    ``value`` is exact; ``evaluate`` (used by the solvers) returns derivatives of
    ``sqrt(||x - center||^2 + delta^2)`` so the kink at the center is smoothed.
    """

    kind = "norm2"

    def __init__(self, center):
        self.center = _vec(center, "norm2 center")

    @property
    def n(self):
        return self.center.size

    def value(self, x):
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))

    def evaluate(self, x, delta=SMOOTH_DELTA):
        r = x - self.center
        s = np.sqrt(r @ r + delta ** 2)
        g = r / s
        return float(s), g, (np.eye(self.n) - np.outer(g, g)) / s

    def smooth_value(self, x, delta=SMOOTH_DELTA):
        r = x - self.center
        return float(np.sqrt(r @ r + delta ** 2))

    def box_max(self, lower, upper):
        far = np.maximum(np.abs(lower - self.center), np.abs(upper - self.center))
        return float(np.linalg.norm(far))

    def to_record(self):
        return {"kind": self.kind, "center": self.center.tolist()}


class WeightedSum(ConvexExpr):
    kind = "weighted_sum"

    def __init__(self, weights, terms):
        self.weights = _vec(weights, "weighted_sum weights")
        if np.any(self.weights < 0):
            raise ProblemError("weighted_sum weights must be nonnegative")
        self.terms = list(terms)
        if len(self.terms) != self.weights.size:
            raise ProblemError("weighted_sum needs one weight per term")
        if not self.terms:
            raise ProblemError("weighted_sum needs at least one term")

    @property
    def n(self):
        return self.terms[0].n

    def evaluate(self, x, delta=SMOOTH_DELTA):
        v, g, H = 0.0, np.zeros(self.n), np.zeros((self.n, self.n))
        for a, t in zip(self.weights, self.terms):
            tv, tg, tH = t.evaluate(x, delta)
            v += a * tv
            g += a * tg
            H += a * tH
        return v, g, H

    def value(self, x):
        return float(sum(a * t.value(x) for a, t in zip(self.weights, self.terms)))

    def smooth_value(self, x, delta=SMOOTH_DELTA):
        return float(sum(a * t.smooth_value(x, delta) for a, t in zip(self.weights, self.terms)))

    def box_max(self, lower, upper):
        if lower.size <= 16:
            return super().box_max(lower, upper)
        return float(sum(a * t.box_max(lower, upper) for a, t in zip(self.weights, self.terms)))

    def to_record(self):
        return {"kind": self.kind, "weights": self.weights.tolist(),
                "terms": [t.to_record() for t in self.terms]}


_KINDS = {"affine": (Affine, ("c",), ("d",)),
          "quadratic": (Quadratic, ("Q", "b"), ("d",)),
          "sq_dist": (SqDist, ("center",), ()),
          "norm2": (Norm2, ("center",), ())}


def expr_from_record(rec: dict, where: str = "expression") -> ConvexExpr:
    if not isinstance(rec, dict) or "kind" not in rec:
        raise ProblemError(f"{where}: expression record needs a 'kind' field")
    kind = rec["kind"]
    if kind == "weighted_sum":
        terms = [expr_from_record(t, f"{where}.terms[{i}]") for i, t in enumerate(rec.get("terms", []))]
        return WeightedSum(rec.get("weights", []), terms)
    if kind not in _KINDS:
        raise ProblemError(f"{where}: unknown expression kind {kind!r}")
    cls, required, optional = _KINDS[kind]
    allowed = {"kind", "rhs", *required, *optional}
    extra = set(rec) - allowed
    if extra:
        raise ProblemError(f"{where}: unexpected field(s) {sorted(extra)} for kind {kind!r}")
    missing = [k for k in required if k not in rec]
    if missing:
        raise ProblemError(f"{where}: missing field(s) {missing} for kind {kind!r}")
    return cls(*(rec[k] for k in required), *(rec[k] for k in optional if k in rec))


@dataclass(frozen=True)
class Constraint:
    """``expr(x) - rhs <= 0``."""

    expr: ConvexExpr
    rhs: float = 0.0

    def value(self, x) -> float:
        return self.expr.value(x) - self.rhs

    def to_record(self) -> dict:
        rec = self.expr.to_record()
        if self.rhs != 0.0:
            rec["rhs"] = self.rhs
        return rec


@dataclass
class CvopInstance:
    """Minimize Gamma(x) w.r.t. the cone order over X = box ∩ {g_i(x) <= 0}."""

    n: int
    q: int
    objective: list[ConvexExpr]
    constraints: list[Constraint]
    lower: np.ndarray
    upper: np.ndarray
    cone: PolyCone
    norm: NormSpec = NormSpec.L2
    beta: float | None = None
    slater_point: np.ndarray | None = None
    name: str = "problem"
    eff_lower: np.ndarray = field(init=False, repr=False)
    eff_upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.norm = NormSpec.parse(self.norm)
        if self.cone.norm is not self.norm:
            self.cone = self.cone.with_norm(self.norm)
        self.validate()

    def validate(self):
        n, q = self.n, self.q
        if n < 1 or q < 1:
            raise ProblemError("n and q must be positive")
        if len(self.objective) != q:
            raise ProblemError(f"objective has {len(self.objective)} components, q = {q}")
        for i, e in enumerate(self.objective):
            if e.n != n:
                raise ProblemError(f"objective[{i}] has dimension {e.n}, n = {n}")
        for i, c in enumerate(self.constraints):
            if c.expr.n != n:
                raise ProblemError(f"constraints[{i}] has dimension {c.expr.n}, n = {n}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ProblemError("box.lower and box.upper must have length n")
        if np.any(self.lower >= self.upper):
            raise ProblemError("box has empty interior (lower >= upper)")
        if self.cone.q != q:
            raise ProblemError(f"cone lives in R^{self.cone.q}, q = {q}")
        if np.any(self.cone.dual_generators < 0):
            # w^T Gamma convex for all w in C+ is only certified for nonnegative generators
            raise ProblemError("dual generators with negative entries: C-convexity cannot be certified")
        lo, hi = self.lower.copy(), self.upper.copy()
        for c in self.constraints:
            if isinstance(c.expr, (Norm2, SqDist)):
                r = c.rhs if isinstance(c.expr, Norm2) else np.sqrt(max(c.rhs, 0.0))
                lo = np.maximum(lo, c.expr.center - r)
                hi = np.minimum(hi, c.expr.center + r)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ProblemError("feasible set is not bounded: give a finite box or a ball constraint")
        self.eff_lower, self.eff_upper = lo, hi
        if self.slater_point is None:
            self.slater_point = 0.5 * (lo + hi)
            origin = "center of the bounding box"
        else:
            self.slater_point = np.asarray(self.slater_point, dtype=float)
            origin = "declared slater_point"
        if not self.is_strictly_feasible(self.slater_point):
            raise ProblemError(f"no strictly feasible point: the {origin} is not interior to X")

    def is_strictly_feasible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            return False
        if np.any(x <= self.lower) or np.any(x >= self.upper):
            return False
        return all(c.value(x) < 0 for c in self.constraints)

    def is_feasible(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        scale = 1.0 + np.abs(x).max()
        if np.any(x < self.lower - tol * scale) or np.any(x > self.upper + tol * scale):
            return False
        return all(c.value(x) <= tol * (1.0 + abs(c.rhs)) for c in self.constraints)

    def gamma_map(self, x) -> np.ndarray:
        """Objective vector Gamma(x)."""
        x = np.asarray(x, dtype=float)
        return np.array([e.value(x) for e in self.objective])

    def sample_feasible(self, count: int, rng: np.random.Generator, max_tries: int = 200) -> np.ndarray:
        """Rejection sampling from the bounding box, uniform over X."""
        out = []
        lo, hi = self.eff_lower, self.eff_upper
        batch = max(64, 4 * count)
        for _ in range(max_tries):
            xs = lo + (hi - lo) * rng.random((batch, self.n))
            out.extend(x for x in xs if self.is_feasible(x, 0.0))
            if len(out) >= count:
                return np.array(out[:count])
        raise ProblemError("could not sample feasible points; feasible set too thin")

    def compute_beta(self) -> float:
        """Upper bound on sup over X of w_bar @ Gamma(x), from the bounding box."""
        if self.beta is not None:
            return float(self.beta)
        combo = WeightedSum(self.cone.w_bar, self.objective)
        return combo.box_max(self.eff_lower, self.eff_upper)

    def with_norm(self, norm) -> "CvopInstance":
        return CvopInstance(self.n, self.q, self.objective, self.constraints, self.lower, self.upper,
                            self.cone, NormSpec.parse(norm), self.beta, self.slater_point, self.name)

    def to_record(self) -> dict:
        rec = {"n": self.n, "q": self.q, "norm": self.norm.value,
               "cone": {"dual_generators": self.cone.dual_generators.tolist(),
                        "generators": self.cone.primal_generators.tolist()},
               "objective": [e.to_record() for e in self.objective],
               "constraints": [c.to_record() for c in self.constraints],
               "box": {"lower": self.lower.tolist(), "upper": self.upper.tolist()}}
        if self.beta is not None:
            rec["beta"] = float(self.beta)
        rec["slater_point"] = np.asarray(self.slater_point).tolist()
        return rec

    def __eq__(self, other):
        if not isinstance(other, CvopInstance):
            return NotImplemented
        a, b = self.to_record(), other.to_record()
        return _close_records(a, b)


def _close_records(a, b) -> bool:
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_close_records(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return isinstance(b, (list, tuple)) and len(a) == len(b) and all(map(_close_records, a, b))
    if isinstance(a, float) or isinstance(b, float):
        return bool(np.isclose(a, b, rtol=1e-12, atol=1e-12) or (np.isinf(a) and a == b))
    return a == b


def eval_objective(inst: CvopInstance, i: int, x) -> OracleEval:
    """Value and gradient of the i-th objective (1-based index)."""
    if not 1 <= i <= inst.q:
        raise IndexError(f"objective index {i} out of range 1..{inst.q}")
    e = inst.objective[i - 1]
    x = np.asarray(x, dtype=float)
    _, g, _ = e.evaluate(x)
    return OracleEval(e.value(x), g)


def eval_scalarized(inst: CvopInstance, w, x) -> OracleEval:
    """Value and gradient of ``w @ Gamma(x)`` for w in the dual cone."""
    w = np.asarray(w, dtype=float)
    if not inst.cone.in_dual(w):
        raise ValueError("weight vector is not in the dual cone")
    x = np.asarray(x, dtype=float)
    val, grad = 0.0, np.zeros(inst.n)
    for wi, e in zip(w, inst.objective):
        _, g, _ = e.evaluate(x)
        val += wi * e.value(x)
        grad += wi * g
    return OracleEval(float(val), grad)


# --- problem files -------------------------------------------------------------------------

_TOP_KEYS = {"n", "q", "norm", "cone", "objective", "constraints", "box", "beta", "slater_point", "name"}


def _line_of(text: str, pattern: str, occurrence: int = 0) -> int | None:
    hits = [m.start() for m in re.finditer(pattern, text, flags=re.MULTILINE)]
    if occurrence < len(hits):
        return text.count("\n", 0, hits[occurrence]) + 1
    return None


def _expr_list(data: dict, key: str, text: str) -> list[tuple[dict, int | None]]:
    recs = data.get(key, [])
    if not isinstance(recs, list):
        raise ProblemError(f"'{key}' must be a list of expression records", _line_of(text, rf"^[ \t]*{key}\b"))
    header = rf"^[ \t]*\[\[\s*{key}\s*\]\]"
    if _line_of(text, header) is not None:
        return [(r, _line_of(text, header, i)) for i, r in enumerate(recs)]
    line = _line_of(text, rf"^[ \t]*{key}\s*=")
    return [(r, line) for r in recs]


def parse_problem(text: str, name: str = "problem") -> CvopInstance:
    """Parse and validate a TOML problem document."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ProblemError(f"syntax error: {exc}", int(m.group(1)) if m else None) from None
    unknown = set(data) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ProblemError(f"unknown field(s) {sorted(unknown)}", _line_of(text, rf"^[ \t]*\[?\[?\s*{key}\b"))
    for key in ("n", "q", "cone", "objective"):
        if key not in data:
            raise ProblemError(f"missing required field '{key}'")
    n, q = data["n"], data["q"]
    if not (isinstance(n, int) and isinstance(q, int)):
        raise ProblemError("n and q must be integers", _line_of(text, r"^[ \t]*n\s*="))

    def build(key):
        out = []
        for i, (rec, line) in enumerate(_expr_list(data, key, text)):
            try:
                expr = expr_from_record(rec, f"{key}[{i}]")
                rhs = float(rec.get("rhs", 0.0))
            except ProblemError as exc:
                raise ProblemError(str(exc), line) from None
            except (TypeError, ValueError) as exc:
                raise ProblemError(f"{key}[{i}]: {exc}", line) from None
            if key == "objective" and rhs != 0.0:
                raise ProblemError(f"objective[{i}]: 'rhs' is only meaningful in constraints", line)
            out.append((expr, rhs))
        return out

    objective = [e for e, _ in build("objective")]
    constraints = [Constraint(e, r) for e, r in build("constraints")]
    cone_line = _line_of(text, r"^[ \t]*\[\s*cone\s*\]")
    cone_rec = data["cone"]
    if "dual_generators" not in cone_rec:
        raise ProblemError("cone.dual_generators is required", cone_line)
    norm = NormSpec.parse(data.get("norm", "l2"))
    try:
        W = np.array(cone_rec["dual_generators"], dtype=float)
        G = np.array(cone_rec.get("generators", []), dtype=float)
        if G.size == 0:
            G = _primal_generators_from_dual(W)
        cone = PolyCone(W, G, norm)
    except ValueError as exc:
        raise ProblemError(f"cone: {exc}", cone_line) from None
    box = data.get("box", {})
    lower = np.array(box.get("lower", [-np.inf] * n), dtype=float)
    upper = np.array(box.get("upper", [np.inf] * n), dtype=float)
    try:
        return CvopInstance(n, q, objective, constraints, lower, upper, cone, norm,
                            data.get("beta"), data.get("slater_point"), data.get("name", name))
    except ProblemError as exc:
        if exc.line is None:
            raise ProblemError(str(exc), _line_of(text, r"^[ \t]*\[\s*box\s*\]")) from None
        raise


def _primal_generators_from_dual(W: np.ndarray) -> np.ndarray:
    """Extreme rays of {y : W y >= 0} for a pointed cone (q-1 subsets of tight rows)."""
    from .vertex_enum import rank

    J, q = W.shape
    rays = []
    for idx in itertools.combinations(range(J), q - 1):
        M = W[list(idx)]
        if rank(M) != q - 1:
            continue
        _, _, vt = np.linalg.svd(M)
        d = vt[-1]
        for s in (d, -d):
            if np.all(W @ s >= -1e-12) and not any(np.allclose(s, r) for r in rays):
                rays.append(s)
    if not rays:
        raise ValueError("could not derive generators of C from the dual generators")
    return np.array(rays)


def serialize_problem(inst: CvopInstance) -> str:
    # the name is kept in the file but is not part of instance equality
    return tomli_w.dumps({"name": inst.name, **inst.to_record()})


def load_problem(source: str) -> CvopInstance:
    """Builtin name or path to a problem file."""
    if source in BUILTINS:
        return builtin(source)
    path = Path(source)
    if not path.is_file():
        raise ProblemError(f"no such builtin or file: {source}")
    return parse_problem(path.read_text(encoding="utf-8"), path.stem)


# --- builtins -----------------------------------------------------------------------------

def _example1(q: int) -> CvopInstance:
    eye = np.eye(q)
    return CvopInstance(
        n=q, q=q,
        objective=[Affine(eye[i]) for i in range(q)],
        constraints=[Constraint(Norm2(np.ones(q)), 1.0)],
        lower=np.full(q, -np.inf), upper=np.full(q, np.inf),
        cone=PolyCone.orthant(q), name=f"example1_q{q}")


def _example2() -> CvopInstance:
    centers = [(1.0, 1.0), (2.0, 3.0), (4.0, 2.0)]
    return CvopInstance(
        n=2, q=3,
        objective=[SqDist(a) for a in centers],
        constraints=[Constraint(Affine([1.0, 2.0]), 10.0)],
        lower=np.array([0.0, 0.0]), upper=np.array([10.0, 4.0]),
        cone=PolyCone.orthant(3), name="example2")


def _example3() -> CvopInstance:
    bs = [(0.0, 10.0, -120.0), (80.0, -448.0, 80.0), (-448.0, 80.0, 80.0)]
    return CvopInstance(
        n=3, q=3,
        objective=[Quadratic(np.eye(3), b) for b in bs],
        constraints=[Constraint(SqDist(np.zeros(3)), 100.0)],
        lower=np.zeros(3), upper=np.full(3, 10.0),
        cone=PolyCone.orthant(3), name="example3")


BUILTINS = {
    "example1_q2": lambda: _example1(2),
    "example1_q3": lambda: _example1(3),
    "example1_q4": lambda: _example1(4),
    "example2": _example2,
    "example3": _example3,
}


def builtin(name: str) -> CvopInstance:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin problem {name!r}; choose from {sorted(BUILTINS)}") from None
