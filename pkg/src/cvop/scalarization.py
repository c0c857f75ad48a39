"""Scalar subproblems solved by a dense log-barrier interior point method.

Every program here is put in the lifted form

    minimize    k_obj @ e(x) + c_obj @ u
    subject to  K @ e(x) + L @ u + c0 <= 0          (scalar rows)
                (F_b @ u + f_b)[0] >= ||(F_b @ u + f_b)[1:]||_2   (second-order cones)
                A_eq @ u == b_eq

where ``e(x)`` stacks convex expressions of the leading ``n_x`` variables. Lagrange
multipliers are read off the barrier central path: ``1 / (tau * -g)`` for scalar rows and
``-grad(phi) / tau`` for the cone blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg
from scipy.optimize import nnls

from .geometry import NormSpec, PolyCone, dual_norm_eval, norm_eval
from .problem import CvopInstance

log = logging.getLogger(__name__)

TOL_ZERO = 1e-7


class SolverError(RuntimeError):
    pass


class InfeasibleSubproblem(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol_gap: float = 1e-10
    tol_feas: float = 1e-8
    max_barrier_iters: int = 60
    mu: float = 10.0
    delta_smooth: float = 1e-9
    max_newton: int = 100
    newton_tol: float = 1e-12

    def __post_init__(self):
        for name in ("tol_gap", "tol_feas", "mu", "delta_smooth", "newton_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mu <= 1:
            raise ValueError("mu must exceed 1")


@dataclass
class LiftedProgram:
    n_vars: int
    n_x: int = 0
    exprs: list = field(default_factory=list)
    delta: float = 1e-9
    k_obj: np.ndarray | None = None
    c_obj: np.ndarray | None = None
    K: np.ndarray | None = None
    L: np.ndarray | None = None
    c0: np.ndarray | None = None
    soc_F: np.ndarray | None = None
    soc_f: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        E, N = len(self.exprs), self.n_vars
        self.k_obj = np.zeros(E) if self.k_obj is None else np.asarray(self.k_obj, float)
        self.c_obj = np.zeros(N) if self.c_obj is None else np.asarray(self.c_obj, float)
        if self.L is None:
            self.L = np.zeros((0, N))
        self.L = np.atleast_2d(np.asarray(self.L, float)).reshape(-1, N)
        m = self.L.shape[0]
        self.K = np.zeros((m, E)) if self.K is None else np.asarray(self.K, float).reshape(m, E)
        self.c0 = np.zeros(m) if self.c0 is None else np.asarray(self.c0, float)
        if self.soc_F is None:
            self.soc_F = np.zeros((0, 1, N))
            self.soc_f = np.zeros((0, 1))
        if self.A_eq is None:
            self.A_eq = np.zeros((0, N))
            self.b_eq = np.zeros(0)

    @property
    def m(self) -> int:
        return self.L.shape[0]

    @property
    def n_soc(self) -> int:
        return self.soc_F.shape[0]

    def _exprs(self, u):
        E, n = len(self.exprs), self.n_x
        vals, grads, hess = np.zeros(E), np.zeros((E, n)), np.zeros((E, n, n))
        x = u[:n]
        for k, e in enumerate(self.exprs):
            vals[k], grads[k], hess[k] = e.evaluate(x, self.delta)
        return vals, grads, hess

    def _values(self, u):
        x = u[:self.n_x]
        return np.array([e.smooth_value(x, self.delta) for e in self.exprs])

    def rows(self, u, vals):
        return self.K @ vals + self.L @ u + self.c0

    def soc_values(self, u):
        Y = self.soc_F @ u + self.soc_f
        t, z = Y[:, 0], Y[:, 1:]
        return Y, t, t * t - np.einsum("bi,bi->b", z, z)

    def objective(self, u, vals):
        return float(self.k_obj @ vals + self.c_obj @ u)


class BarrierResult(NamedTuple):
    u: np.ndarray
    value: float
    row_mult: np.ndarray
    soc_mult: np.ndarray
    gap: float
    newton_steps: int


def barrier_solve(prog: LiftedProgram, u0: np.ndarray, cfg: SolverConfig = SolverConfig(),
                  gap_scale: float | None = None) -> BarrierResult:
    """Minimize ``prog`` from a strictly feasible ``u0``.

    Stops when the central-path duality gap ``(m + 2 B) / tau`` drops below
    ``cfg.tol_gap * (1 + |value|)`` (or ``cfg.tol_gap * gap_scale`` when given).
    """
    N, n = prog.n_vars, prog.n_x
    u = np.array(u0, dtype=float)
    vals, _, _ = prog._exprs(u)
    if np.any(prog.rows(u, vals) >= 0):
        raise InfeasibleSubproblem("starting point violates a constraint")
    _, t, D = prog.soc_values(u)
    if np.any(t <= 0) or np.any(D <= 0):
        raise InfeasibleSubproblem("starting point outside a second-order cone")
    if prog.A_eq.shape[0] and np.abs(prog.A_eq @ u - prog.b_eq).max() > 1e-9 * (1 + np.abs(prog.b_eq).max()):
        raise InfeasibleSubproblem("starting point violates an equality constraint")

    m_eff = prog.m + 2 * prog.n_soc
    tau = m_eff / (1.0 + abs(prog.objective(u, vals)))
    steps = 0
    p_eq = prog.A_eq.shape[0]
    soc_sign = None

    def barrier_value(uu, tau_):
        vv = prog._values(uu)
        g = prog.rows(uu, vv)
        _, tt, DD = prog.soc_values(uu)
        if np.any(g >= 0) or np.any(tt <= 0) or np.any(DD <= 0):
            return np.inf
        return tau_ * prog.objective(uu, vv) - np.log(-g).sum() - np.log(DD).sum()

    for outer in range(cfg.max_barrier_iters):
        for _ in range(cfg.max_newton):
            vals, grads, hess = prog._exprs(u)
            g = prog.rows(u, vals)
            d = 1.0 / -g
            J = prog.L.copy()
            if n:
                J[:, :n] += prog.K @ grads
            grad = tau * prog.c_obj + J.T @ d
            H = J.T @ (d[:, None] ** 2 * J)
            if n:
                grad[:n] += tau * (prog.k_obj @ grads)
                wts = tau * prog.k_obj + prog.K.T @ d
                H[:n, :n] += np.einsum("e,eij->ij", wts, hess)
            if prog.n_soc:
                Y, t, D = prog.soc_values(u)
                if soc_sign is None:
                    soc_sign = np.ones(Y.shape[1])
                    soc_sign[0] = -1.0
                gY = np.empty_like(Y)
                gY[:, 0] = -2 * Y[:, 0]
                gY[:, 1:] = 2 * Y[:, 1:]
                gY /= D[:, None]
                grad += np.einsum("bij,bi->j", prog.soc_F, gY)
                dD = -gY * D[:, None]  # (2t, -2z)
                HY = (2.0 * soc_sign[None, :, None] * np.eye(Y.shape[1])[None]) / D[:, None, None]
                HY = HY + np.einsum("bi,bj->bij", dD, dD) / (D ** 2)[:, None, None]
                H += np.einsum("bki,bkl,blj->ij", prog.soc_F, HY, prog.soc_F)
            H = 0.5 * (H + H.T)
            dx = _newton_direction(H, grad, prog.A_eq if p_eq else None,
                                  prog.b_eq - prog.A_eq @ u if p_eq else None)
            lam2 = float(-grad @ dx)
            steps += 1
            if lam2 <= 2 * cfg.newton_tol:
                break
            phi0 = barrier_value(u, tau)
            s, slope = 1.0, grad @ dx
            while s > 1e-14:
                phi1 = barrier_value(u + s * dx, tau)
                if phi1 <= phi0 + 0.25 * s * slope:
                    break
                s *= 0.5
            else:
                break
            u = u + s * dx
            if s * np.abs(dx).max() <= 1e-15 * (1 + np.abs(u).max()):
                break
        vals, _, _ = prog._exprs(u)
        value = prog.objective(u, vals)
        gap = m_eff / tau
        target = cfg.tol_gap * (gap_scale if gap_scale is not None else 1.0 + abs(value))
        if gap <= target:
            break
        tau *= cfg.mu
    else:
        log.debug("barrier iteration cap reached (gap %.3g)", m_eff / tau)

    vals, _, _ = prog._exprs(u)
    g = prog.rows(u, vals)
    row_mult = 1.0 / (tau * -g)
    soc_mult = np.zeros((prog.n_soc, prog.soc_F.shape[1]))
    if prog.n_soc:
        Y, _, D = prog.soc_values(u)
        soc_mult[:, 0] = 2 * Y[:, 0] / (tau * D)
        soc_mult[:, 1:] = -2 * Y[:, 1:] / (tau * D[:, None])
    return BarrierResult(u, prog.objective(u, vals), row_mult, soc_mult, m_eff / tau, steps)


def _newton_direction(H, grad, A_eq, resid=None):
    """Newton step; with equality rows the step also removes the residual ``b - A u``."""
    if A_eq is None:
        try:
            c = linalg.cho_factor(H, check_finite=False)
            return linalg.cho_solve(c, -grad, check_finite=False)
        except linalg.LinAlgError:
            return np.linalg.lstsq(H, -grad, rcond=None)[0]
    p, N = A_eq.shape
    r = np.zeros(p) if resid is None else resid
    # Schur complement on a Cholesky factor of H: stays accurate when barrier terms make the
    # diagonal of H span many orders of magnitude, where a block LU solve loses the equality rows
    try:
        c = linalg.cho_factor(H, check_finite=False)
        Hg = linalg.cho_solve(c, grad, check_finite=False)
        HA = linalg.cho_solve(c, A_eq.T, check_finite=False)
        S = A_eq @ HA
        nu = np.linalg.solve(S, -A_eq @ Hg - r)
        return -Hg - HA @ nu
    except (linalg.LinAlgError, np.linalg.LinAlgError):
        pass
    KKT = np.block([[H, A_eq.T], [A_eq, np.zeros((p, p))]])
    rhs = np.concatenate([-grad, r])
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
    return sol[:N]


# --- norm epigraphs --------------------------------------------------------------------------

def _norm_rows(norm: NormSpec, N: int, z_idx: np.ndarray, t_idx: int, s_idx: np.ndarray | None):
    """Rows (L, c0) and cone blocks encoding ``norm(z) <= t`` on the given variable indices."""
    q = z_idx.size
    if norm is NormSpec.L2:
        F = np.zeros((1, q + 1, N))
        F[0, 0, t_idx] = 1.0
        F[0, np.arange(1, q + 1), z_idx] = 1.0
        return np.zeros((0, N)), np.zeros(0), F, np.zeros((1, q + 1))
    rows = []
    if norm is NormSpec.L1:
        for i in range(q):
            for sign in (1.0, -1.0):
                r = np.zeros(N)
                r[z_idx[i]] = sign
                r[s_idx[i]] = -1.0
                rows.append(r)
        r = np.zeros(N)
        r[s_idx] = 1.0
        r[t_idx] = -1.0
        rows.append(r)
    else:
        for i in range(q):
            for sign in (1.0, -1.0):
                r = np.zeros(N)
                r[z_idx[i]] = sign
                r[t_idx] = -1.0
                rows.append(r)
    L = np.array(rows)
    return L, np.zeros(len(rows)), None, None


def _norm_start(norm: NormSpec, z: np.ndarray) -> tuple[float, np.ndarray | None]:
    if norm is NormSpec.L1:
        s = np.abs(z) + 1.0
        return float(s.sum() + 1.0), s
    return norm_eval(norm, z) + 1.0, None


def _stack(*blocks):
    """Vertically stack (L, c0, K) triples that may be empty."""
    Ls = [b[0] for b in blocks if b[0].shape[0]]
    if not Ls:
        return None
    return (np.vstack(Ls), np.concatenate([b[1] for b in blocks if b[0].shape[0]]),
            np.vstack([b[2] for b in blocks if b[0].shape[0]]))


def _box_rows(inst: CvopInstance, N: int, E: int):
    rows, c0 = [], []
    for i in range(inst.n):
        if np.isfinite(inst.lower[i]):
            r = np.zeros(N)
            r[i] = -1.0
            rows.append(r)
            c0.append(inst.lower[i])
        if np.isfinite(inst.upper[i]):
            r = np.zeros(N)
            r[i] = 1.0
            rows.append(r)
            c0.append(-inst.upper[i])
    return np.array(rows).reshape(-1, N), np.array(c0), np.zeros((len(rows), E))


def _constraint_rows(inst: CvopInstance, N: int, E: int, offset: int):
    p = len(inst.constraints)
    K = np.zeros((p, E))
    K[np.arange(p), offset + np.arange(p)] = 1.0
    return np.zeros((p, N)), -np.array([c.rhs for c in inst.constraints]), K


def _exprs_of(inst: CvopInstance, cfg: SolverConfig):
    return list(inst.objective) + [c.expr for c in inst.constraints]


def _scale(inst: CvopInstance) -> float:
    return 1.0 + float(np.abs(inst.gamma_map(inst.slater_point)).max())


# --- weighted sum --------------------------------------------------------------------------

class WeightedSumResult(NamedTuple):
    x: np.ndarray
    value: float
    gap: float

    @property
    def lower_bound(self) -> float:
        return self.value - self.gap


def solve_weighted_sum(inst: CvopInstance, w, cfg: SolverConfig = SolverConfig()) -> WeightedSumResult:
    """Minimize ``w @ Gamma(x)`` over the feasible set."""
    w = np.asarray(w, dtype=float)
    if not np.any(w != 0) or not inst.cone.in_dual(w):
        raise ValueError("weight must be a nonzero element of the dual cone")
    n, q = inst.n, inst.q
    exprs = _exprs_of(inst, cfg)
    E, N = len(exprs), n
    stacked = _stack(_constraint_rows(inst, N, E, q), _box_rows(inst, N, E))
    k_obj = np.concatenate([w, np.zeros(E - q)])
    if stacked is None:
        prog = LiftedProgram(N, n, exprs, cfg.delta_smooth, k_obj=k_obj)
    else:
        L, c0, K = stacked
        prog = LiftedProgram(N, n, exprs, cfg.delta_smooth, k_obj=k_obj, K=K, L=L, c0=c0)
    scale = abs(w) @ np.abs(inst.gamma_map(inst.slater_point)) + 1.0
    res = barrier_solve(prog, inst.slater_point.copy(), cfg, gap_scale=scale)
    x = res.u[:n]
    value = float(w @ inst.gamma_map(x))
    return WeightedSumResult(x, value, res.gap + abs(value - res.value))


# --- norm minimization -----------------------------------------------------------------------

@dataclass
class PrimalDualSolution:
    """Primal ``(x, z)`` and dual ``(w, lambda)`` of the norm-minimizing subproblem at ``v``."""

    v: np.ndarray
    x: np.ndarray
    z: np.ndarray
    objective_value: float
    w: np.ndarray
    lam: float
    w_tilde: np.ndarray
    gap: float
    newton_steps: int = 0

    @property
    def y(self) -> np.ndarray:
        return self.v + self.z

    def unit_normal(self, norm: NormSpec) -> np.ndarray:
        """``w_tilde`` rescaled to unit dual norm."""
        s = dual_norm_eval(norm, self.w_tilde)
        if s == 0:
            raise SolverError("zero dual direction; no cut available")
        return self.w_tilde / s


def _norm_min_program(inst: CvopInstance, v, gamma, w_bar, cfg):
    n, q, cone = inst.n, inst.q, inst.cone
    norm = inst.norm
    exprs = _exprs_of(inst, cfg)
    E = len(exprs)
    x_idx = np.arange(n)
    z_idx = n + np.arange(q)
    t_idx = n + q
    s_idx = n + q + 1 + np.arange(q) if norm is NormSpec.L1 else None
    N = n + q + 1 + (q if norm is NormSpec.L1 else 0)
    W = cone.dual_generators
    J = W.shape[0]

    cone_L = np.zeros((J, N))
    cone_L[:, z_idx] = -W
    cone_K = np.zeros((J, E))
    cone_K[:, :q] = W
    blocks = [(cone_L, -W @ v, cone_K)]
    if gamma is not None:
        sL = np.zeros((1, N))
        sL[0, z_idx] = w_bar
        blocks.append((sL, np.array([w_bar @ v - gamma]), np.zeros((1, E))))
    blocks.append(_constraint_rows(inst, N, E, q))
    blocks.append(_box_rows(inst, N, E))
    nL, nc0, F, f = _norm_rows(norm, N, z_idx, t_idx, s_idx)
    blocks.append((nL, nc0, np.zeros((nL.shape[0], E))))
    L, c0, K = _stack(*blocks)
    c_obj = np.zeros(N)
    c_obj[t_idx] = 1.0
    prog = LiftedProgram(N, n, exprs, cfg.delta_smooth, c_obj=c_obj, K=K, L=L, c0=c0, soc_F=F, soc_f=f)

    x0 = inst.slater_point.copy()
    g0 = inst.gamma_map(x0)
    c = cone.interior_direction()
    step = 1.0
    if gamma is not None:
        room = gamma - w_bar @ g0
        if room <= 0:
            raise InfeasibleSubproblem("gamma too small: Gamma(slater point) lies outside S(gamma)")
        step = min(1.0, 0.5 * room / (w_bar @ c))
    z0 = g0 - v + step * c
    t0, s0 = _norm_start(norm, z0)
    u0 = np.zeros(N)
    u0[x_idx], u0[z_idx], u0[t_idx] = x0, z0, t0
    if s0 is not None:
        u0[s_idx] = s0
    return prog, u0, (x_idx, z_idx, J)


def _solve_nm(inst, v, gamma, w_bar, cfg) -> PrimalDualSolution:
    v = np.asarray(v, dtype=float)
    if v.shape != (inst.q,):
        raise ValueError(f"v must have length q = {inst.q}")
    prog, u0, (x_idx, z_idx, J) = _norm_min_program(inst, v, gamma, w_bar, cfg)
    res = barrier_solve(prog, u0, cfg)
    x, z = res.u[x_idx], res.u[z_idx]
    mult = res.row_mult
    w = mult[:J] @ inst.cone.dual_generators
    lam = float(mult[J]) if gamma is not None else 0.0
    wb = w_bar if w_bar is not None else inst.cone.w_bar
    val = norm_eval(inst.norm, z)
    if val > TOL_ZERO:
        w, lam = _refine_dual(inst, z, w, lam, wb, gamma is not None)
    w_tilde = w - lam * wb
    log.debug("norm-min at %s: |z|=%.3e gap=%.2e steps=%d", v, val, res.gap, res.newton_steps)
    return PrimalDualSolution(v, x, z, val, w, lam, w_tilde, res.gap + max(0.0, res.value - val),
                              res.newton_steps)


def _subgradient_projection(norm: NormSpec, z: np.ndarray, w_est: np.ndarray) -> np.ndarray:
    """Closest-in-spirit element of the subdifferential of ``norm`` at ``z != 0``."""
    if norm is NormSpec.L2:
        return z / np.linalg.norm(z)
    a = np.abs(z)
    top = a.max()
    if norm is NormSpec.L1:
        out = np.clip(w_est, -1.0, 1.0)
        hit = a > 1e-9 * top
        out[hit] = np.sign(z[hit])
        return out
    hit = a >= (1.0 - 1e-9) * top
    weights = np.where(hit, np.maximum(np.sign(z) * w_est, 0.0), 0.0)
    if weights.sum() <= 0:
        weights = hit.astype(float)
    return np.sign(z) * weights / weights.sum()


def _refine_dual(inst, z, w, lam, w_bar, with_s):
    """Enforce stationarity in z: ``w - lam w_bar`` must be a subgradient of the norm at z.

    Barrier multipliers come from constraint values of size ``1/tau`` and inherit a common
    scale error of relative size ``eps_mach * tau``; their direction is far more accurate.
    First rescale onto ``||w_tilde||_* = 1``. If ``w_tilde @ z = ||z||`` still fails, replace
    ``w_tilde`` by the nearest subgradient and refit the cone multipliers.
    """
    norm = inst.norm
    val = norm_eval(norm, z)
    s = dual_norm_eval(norm, w - lam * w_bar)
    if s > 0:
        w, lam = w / s, lam / s
        if abs(val - (w - lam * w_bar) @ z) <= 1e-10 * (1.0 + val):
            return w, lam
    target = _subgradient_projection(norm, z, w - lam * w_bar)
    w_new = target + lam * w_bar
    if inst.cone.in_dual(w_new, 1e-12):
        return w_new, lam
    W = inst.cone.dual_generators
    J = W.shape[0]
    cols = [W.T] + ([-w_bar[:, None]] if with_s else [])
    sol, res = nnls(np.hstack(cols), target)
    if res > 1e-9:
        log.debug("dual refinement left residual %.2e; keeping rescaled multipliers", res)
        return w, lam
    return W.T @ sol[:J], (float(sol[J]) if with_s else 0.0)


def solve_norm_min(inst: CvopInstance, v, cfg: SolverConfig = SolverConfig()) -> PrimalDualSolution:
    """Distance from ``v`` to the upper image, with a dual certificate (lambda is 0)."""
    return _solve_nm(inst, v, None, None, cfg)


def solve_modified(inst: CvopInstance, v, gamma: float, w_bar, cfg: SolverConfig = SolverConfig()
                   ) -> PrimalDualSolution:
    """Distance from ``v`` to the upper image truncated by ``S(gamma) = {y : w_bar @ y <= gamma}``."""
    w_bar = np.asarray(w_bar, dtype=float)
    v = np.asarray(v, dtype=float)
    if w_bar @ v > gamma + cfg.tol_feas * (1.0 + abs(gamma)):
        raise ValueError("v must lie in S(gamma)")
    return _solve_nm(inst, v, float(gamma), w_bar, cfg)


def dual_value(inst: CvopInstance, v, w, lam: float = 0.0, gamma: float | None = None,
               w_bar=None, cfg: SolverConfig = SolverConfig()) -> float:
    """Certified lower bound on the dual objective at ``(w, lam)``.

    ``(w, lam)`` is first scaled into the dual-feasible set ``||w - lam w_bar||_* <= 1``;
    the inner infimum over X is replaced by the weighted-sum lower bound.
    """
    v = np.asarray(v, dtype=float)
    w = np.clip(np.asarray(w, dtype=float), 0.0, None) if np.all(inst.cone.dual_generators >= 0) \
        else np.asarray(w, dtype=float)
    wb = inst.cone.w_bar if w_bar is None else np.asarray(w_bar, dtype=float)
    lam = max(float(lam), 0.0) if gamma is not None else 0.0
    s = dual_norm_eval(inst.norm, w - lam * wb)
    if s > 1.0:
        w, lam = w / s, lam / s
    inner = solve_weighted_sum(inst, w, cfg).lower_bound if np.any(w > 0) else 0.0
    out = inner - w @ v
    if gamma is not None:
        out += lam * (wb @ v - gamma)
    return float(out)


# --- projections ---------------------------------------------------------------------------

class Projection(NamedTuple):
    nearest: np.ndarray
    dist: float


def project_onto_polytope(point, vertices, cone: PolyCone | None = None, norm: NormSpec = NormSpec.L2,
                          cfg: SolverConfig = SolverConfig()) -> Projection:
    """Nearest point of ``conv(vertices) + cone`` to ``point`` in the given norm."""
    point = np.asarray(point, dtype=float)
    V = np.atleast_2d(np.asarray(getattr(vertices, "vertices", vertices), dtype=float))
    q = point.size
    Cg = np.zeros((0, q)) if cone is None else cone.primal_generators
    nv, M = V.shape[0], Cg.shape[0]
    if nv == 0:
        raise ValueError("empty vertex set")
    if nv == 1 and M == 0:
        return Projection(V[0].copy(), norm_eval(norm, point - V[0]))
    l_idx = np.arange(nv)
    m_idx = nv + np.arange(M)
    z_idx = nv + M + np.arange(q)
    t_idx = nv + M + q
    s_idx = t_idx + 1 + np.arange(q) if norm is NormSpec.L1 else None
    N = t_idx + 1 + (q if norm is NormSpec.L1 else 0)

    pos = np.zeros((nv + M, N))
    pos[np.arange(nv + M), np.arange(nv + M)] = -1.0
    nL, nc0, F, f = _norm_rows(norm, N, z_idx, t_idx, s_idx)
    L = np.vstack([pos, nL])
    c0 = np.concatenate([np.zeros(nv + M), nc0])
    # eliminate z = point - V^T lam - C^T mu so only the simplex row stays as an equality
    keep = np.r_[l_idx, m_idx, t_idx, s_idx if s_idx is not None else np.zeros(0, int)]
    T = np.zeros((N, keep.size))
    T[keep, np.arange(keep.size)] = 1.0
    T[np.ix_(z_idx, np.arange(nv))] = -V.T
    T[np.ix_(z_idx, nv + np.arange(M))] = -Cg.T
    shift = np.zeros(N)
    shift[z_idx] = point
    c0 = c0 + L @ shift
    L = L @ T
    if F is not None:
        f = f + F @ shift
        F = np.einsum("bij,jk->bik", F, T)
    Nr = keep.size
    A = np.zeros((1, Nr))
    A[0, :nv] = 1.0
    c_obj = np.zeros(Nr)
    c_obj[nv + M] = 1.0
    prog = LiftedProgram(Nr, c_obj=c_obj, L=L, c0=c0, soc_F=F, soc_f=f, A_eq=A, b_eq=np.ones(1))

    u0 = np.zeros(Nr)
    u0[:nv] = 1.0 / nv
    u0[nv:nv + M] = 1.0
    z0 = point - V.mean(axis=0) - Cg.sum(axis=0)
    t0, s0 = _norm_start(norm, z0)
    u0[nv + M] = t0
    if s0 is not None:
        u0[nv + M + 1:] = s0
    scale = 1.0 + np.abs(V).max() + np.abs(point).max()
    res = barrier_solve(prog, u0, cfg, gap_scale=scale)
    lam = np.clip(res.u[:nv], 0.0, None)
    # renormalize onto the simplex so the reported point is exactly in the hull
    nearest = V.T @ (lam / lam.sum()) + Cg.T @ np.clip(res.u[nv:nv + M], 0.0, None)
    return Projection(nearest, norm_eval(norm, point - nearest))


def distance_to_hpolytope(point, A, b, interior_point, norm: NormSpec = NormSpec.L2,
                          cfg: SolverConfig = SolverConfig()) -> Projection:
    """Nearest point of ``{y : A y >= b}`` to ``point``; ``interior_point`` must be strictly inside."""
    point = np.asarray(point, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    y0 = np.asarray(interior_point, dtype=float)
    q = point.size
    sc = np.linalg.norm(A, axis=1)
    A, b = A / sc[:, None], b / sc
    if np.all(A @ point - b >= 0):
        return Projection(point.copy(), 0.0)
    y_idx = np.arange(q)
    t_idx = q
    s_idx = q + 1 + np.arange(q) if norm is NormSpec.L1 else None
    N = q + 1 + (q if norm is NormSpec.L1 else 0)
    # z = y - point is affine in y, so shift: variables hold y, the norm acts on y - point
    if norm is NormSpec.L2:
        F = np.zeros((1, q + 1, N))
        F[0, 0, t_idx] = 1.0
        F[0, 1 + np.arange(q), y_idx] = 1.0
        f = np.concatenate([[0.0], -point])[None, :]
        nL, nc0 = np.zeros((0, N)), np.zeros(0)
    else:
        nL, nc0, F, f = _norm_rows(norm, N, y_idx, t_idx, s_idx)
        nc0 = nc0.copy()
        # rows are of the form +-y_i - (s_i or t) <= 0; move the point into the constant
        zpart = nL[:, y_idx]
        nc0 = nc0 - zpart @ point
    L = np.zeros((A.shape[0], N))
    L[:, y_idx] = -A
    L = np.vstack([L, nL])
    c0 = np.concatenate([b, nc0])
    c_obj = np.zeros(N)
    c_obj[t_idx] = 1.0
    prog = LiftedProgram(N, c_obj=c_obj, L=L, c0=c0, soc_F=F, soc_f=f)
    u0 = np.zeros(N)
    u0[y_idx] = y0
    t0, s0 = _norm_start(norm, y0 - point)
    u0[t_idx] = t0
    if s0 is not None:
        u0[s_idx] = s0
    scale = 1.0 + np.abs(point).max() + np.abs(y0).max()
    res = barrier_solve(prog, u0, cfg, gap_scale=scale)
    y = res.u[y_idx]
    return Projection(y, norm_eval(norm, point - y))
