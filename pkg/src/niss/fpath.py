"""Convex-concave path following for the biased maximal correlation problem.

The objective family is

    L_lam = E[f g] + c_f(lam) E[f^2] + c_g(lam) E[g^2] + k(lam)

with ``c_f = lam*alpha1 - (1-lam)*alpha0`` (likewise ``c_g``) and
``k = (1-lam)(alpha0+beta0) - lam(alpha1+beta1)``, so that ``lam = 0`` is a
concave relaxation and ``lam = 1`` a convexified version of the bilinear
objective.  On functions with ``E[f^2] = E[g^2] = 1`` every ``L_lam`` equals
``E[f g]``.

Iterates are kept as value tables on ``X^d`` and ``Y^d``.  The feasible set
for ``f`` is ``{v in [-1, 1]^N : E[v] = bias}``, which is exactly the set of
coefficient vectors whose reconstruction is bounded by 1 with the first
coefficient pinned.  Linear maximization over it is a fractional knapsack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .fourier import FourierVector, fourier_transform, kron_apply, kron_power
from .maxcorr import PrimalInstance, hgr_maximal_correlation

BOUNDARY_TOL = 1e-6
FEAS_TOL = 1e-9
DENSE_EIG_LIMIT = 1500


class InfeasibleStartError(ValueError):
    """The warm start is outside the feasible set."""


@dataclass(frozen=True)
class FPathConfig:
    alpha0: float = 1.0
    beta0: float = 1.0
    alpha1: float = 1.1
    beta1: float = 1.1
    d_lambda: float = 2e-5
    eps_lambda: float = 0.04
    fw_max_iters: int = 10000
    fw_tol: float = 1e-8
    fw_stall_iters: int = 200
    pg_max_iters: int = 20000
    final_resolve: bool = True
    max_escapes: int = 200

    def __post_init__(self):
        for name in ("alpha0", "beta0", "alpha1", "beta1", "d_lambda", "eps_lambda", "fw_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.fw_max_iters < 1:
            raise ValueError("fw_max_iters must be positive")
        if self.d_lambda > self.eps_lambda:
            raise ValueError("d_lambda must not exceed eps_lambda")

    def weights(self, lam: float) -> tuple[float, float, float]:
        cf = lam * self.alpha1 - (1.0 - lam) * self.alpha0
        cg = lam * self.beta1 - (1.0 - lam) * self.beta0
        k = (1.0 - lam) * (self.alpha0 + self.beta0) - lam * (self.alpha1 + self.beta1)
        return cf, cg, k


# ---------------------------------------------------------------- problem


class PathProblem:
    """Bilinear form ``v_f . J v_g`` with weighted norms and pinned means."""

    def __init__(self, apply_j, apply_jt, wx, wy, bias_f, bias_g, kernel_norm, dense_j=None):
        self.apply_j = apply_j
        self.apply_jt = apply_jt
        self.wx = np.asarray(wx, float)
        self.wy = np.asarray(wy, float)
        self.bias_f = float(bias_f)
        self.bias_g = float(bias_g)
        self.kernel_norm = float(kernel_norm)
        self._dense_j = dense_j

    @classmethod
    def from_instance(cls, inst: PrimalInstance) -> "PathProblem":
        p, d = inst.joint.p, inst.d
        wx = kron_power(inst.joint.px[None, :], d).ravel()
        wy = kron_power(inst.joint.py[None, :], d).ravel()
        sigma = hgr_maximal_correlation(inst.joint)
        if d >= 4:
            pt = p.T.copy()
            prob = cls(lambda v: kron_apply(p, v, d), lambda v: kron_apply(pt, v, d), wx, wy, inst.q_u_bias, inst.q_v_bias, sigma)
            prob._dense_factory = lambda: kron_power(p, d)
            return prob
        dense = kron_power(p, d)
        return cls(dense.__matmul__, dense.T.__matmul__, wx, wy, inst.q_u_bias, inst.q_v_bias, sigma, dense)

    @classmethod
    def from_sequence_joint(cls, joint_matrix, bias_f: float, bias_g: float) -> "PathProblem":
        """Problem for an arbitrary joint over sequence pairs (dense)."""
        jm = np.asarray(joint_matrix, float)
        wx, wy = jm.sum(axis=1), jm.sum(axis=0)
        s = np.linalg.svd(jm / np.sqrt(np.outer(wx, wy)), compute_uv=False)
        return cls(jm.__matmul__, jm.T.__matmul__, wx, wy, bias_f, bias_g, min(1.0, s[1]), jm)

    @property
    def dense_j(self) -> np.ndarray:
        if self._dense_j is None:
            self._dense_j = self._dense_factory()
        return self._dense_j

    def center(self) -> tuple[np.ndarray, np.ndarray]:
        return np.full(self.wx.size, self.bias_f), np.full(self.wy.size, self.bias_g)

    def parts(self, vf, vg) -> tuple[float, float, float]:
        """Bilinear value and the two squared norms."""
        return float(vf @ self.apply_j(vg)), float(self.wx @ (vf * vf)), float(self.wy @ (vg * vg))

    def value(self, vf, vg, lam: float, cfg: FPathConfig) -> float:
        prim, nf, ng = self.parts(vf, vg)
        cf, cg, k = cfg.weights(lam)
        return prim + cf * nf + cg * ng + k

    def violation(self, vf, vg) -> float:
        box = max(np.abs(vf).max(), np.abs(vg).max()) - 1.0
        mean = max(abs(self.wx @ vf - self.bias_f), abs(self.wy @ vg - self.bias_g))
        return max(0.0, box, mean)


def box_mean_lmo(grad, w, bias) -> np.ndarray:
    """Maximize ``grad . s`` over ``s in [-1, 1]^N`` with ``w . s = bias``.

    Greedy by ``grad / w``; the result has at most one entry strictly
    inside ``(-1, 1)``.  Ties go to the lower index.
    """
    n = grad.size
    s = -np.ones(n)
    mass = (bias + 1.0) / 2.0
    if mass <= 0.0:
        return s
    order = np.argsort(-(grad / w), kind="stable")
    cw = np.cumsum(w[order])
    k = int(np.searchsorted(cw, mass - 1e-15))
    s[order[:k]] = 1.0
    if k < n:
        rest = mass - (cw[k - 1] if k else 0.0)
        s[order[k]] = -1.0 + 2.0 * min(1.0, max(0.0, rest / w[order[k]]))
    return s


@dataclass
class FWResult:
    vf: np.ndarray
    vg: np.ndarray
    gap: float
    iterations: int
    escapes: int


def _curvature_step(problem: PathProblem, vf, vg, lam: float, cfg: FPathConfig):
    """Move along the most positively curved feasible direction, if any.

    Frank-Wolfe stalls at stationary points that are not maxima (the
    constant functions are stationary for every ``lam``).  This looks for a
    direction inside the current face that keeps the means fixed and along
    which the objective is strictly convex, then moves to the face boundary.
    """
    cf, cg, _ = cfg.weights(lam)
    ff = np.flatnonzero(np.abs(vf) < 1.0 - FEAS_TOL)
    fg = np.flatnonzero(np.abs(vg) < 1.0 - FEAS_TOL)
    if ff.size + fg.size < 2:
        return None
    sf, sg = np.sqrt(problem.wx[ff]), np.sqrt(problem.wy[fg])
    nf_, ng_ = sf / np.linalg.norm(sf), sg / np.linalg.norm(sg)
    m, n = ff.size, fg.size
    dim = m + n

    def project(u):
        u = u.copy()
        if m:
            u[:m] -= (nf_ @ u[:m]) * nf_
        if n:
            u[m:] -= (ng_ @ u[m:]) * ng_
        return u

    if dim <= DENSE_EIG_LIMIT:
        cross = problem.dense_j[np.ix_(ff, fg)] / np.outer(sf, sg)
        mat = np.zeros((dim, dim))
        mat[:m, :m] = 2.0 * cf * np.eye(m)
        mat[m:, m:] = 2.0 * cg * np.eye(n)
        mat[:m, m:] = cross
        mat[m:, :m] = cross.T
        proj = np.eye(dim)
        if m:
            proj[:m, :m] -= np.outer(nf_, nf_)
        if n:
            proj[m:, m:] -= np.outer(ng_, ng_)
        evals, evecs = np.linalg.eigh(proj @ mat @ proj)
        top, u = evals[-1], evecs[:, -1]
    else:
        nx, ny = problem.wx.size, problem.wy.size

        def matvec(u):
            u = project(np.ravel(u))
            df = np.zeros(nx)
            dg = np.zeros(ny)
            df[ff] = u[:m] / sf
            dg[fg] = u[m:] / sg
            out = np.empty(dim)
            out[:m] = 2.0 * cf * u[:m] + problem.apply_j(dg)[ff] / sf
            out[m:] = 2.0 * cg * u[m:] + problem.apply_jt(df)[fg] / sg
            return project(out)

        op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
        start = project(np.linspace(1.0, 2.0, dim))
        evals, evecs = eigsh(op, k=1, which="LA", v0=start, tol=1e-10)
        top, u = evals[0], evecs[:, 0]
    if top <= 1e-10:
        return None
    u = project(u)
    df = np.zeros_like(vf)
    dg = np.zeros_like(vg)
    df[ff] = u[:m] / sf
    dg[fg] = u[m:] / sg
    # feasible step interval keeping every moving entry inside [-1, 1]
    lo, hi = -np.inf, np.inf
    for v, dv in ((vf, df), (vg, dg)):
        pos, neg = dv > 1e-15, dv < -1e-15
        if pos.any():
            hi = min(hi, np.min((1.0 - v[pos]) / dv[pos]))
            lo = max(lo, np.max((-1.0 - v[pos]) / dv[pos]))
        if neg.any():
            hi = min(hi, np.min((-1.0 - v[neg]) / dv[neg]))
            lo = max(lo, np.max((1.0 - v[neg]) / dv[neg]))
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi - lo <= 1e-14:
        return None
    jdg = problem.apply_j(dg)
    grad_dot = vf @ jdg + df @ problem.apply_j(vg) + 2.0 * cf * (problem.wx @ (vf * df)) + 2.0 * cg * (problem.wy @ (vg * dg))
    curv = df @ jdg + cf * (problem.wx @ (df * df)) + cg * (problem.wy @ (dg * dg))
    best_t, best_gain = 0.0, 0.0
    for t in (lo, hi):
        gain = t * grad_dot + t * t * curv
        if gain > best_gain:
            best_t, best_gain = t, gain
    if best_gain <= 1e-13:
        return None
    new_f = np.clip(vf + best_t * df, -1.0, 1.0)
    new_g = np.clip(vg + best_t * dg, -1.0, 1.0)
    return new_f, new_g


def project_box_mean(u, w, bias) -> np.ndarray:
    """Nearest point to ``u`` in the ``w``-weighted norm with entries in [-1, 1] and ``w . v = bias``.

    The solution is ``clip(u - tau, -1, 1)``; the weighted mean is piecewise
    linear and decreasing in ``tau``, so ``tau`` is read off the breakpoints.
    """
    order = np.argsort(u)
    us, ws = u[order], w[order]
    cw = np.concatenate([[0.0], np.cumsum(ws)])
    cwu = np.concatenate([[0.0], np.cumsum(ws * us)])

    def mean_at(tau):
        hi = np.searchsorted(us, tau + 1.0, side="left")
        lo = np.searchsorted(us, tau - 1.0, side="right")
        return (cw[-1] - cw[hi]) - cw[lo] + (cwu[hi] - cwu[lo]) - tau * (cw[hi] - cw[lo])

    taus = np.unique(np.concatenate([us - 1.0, us + 1.0]))
    means = mean_at(taus)
    # means decrease along taus; find the bracketing pair
    k = int(np.searchsorted(-means, -bias, side="left"))
    if k == 0:
        tau = taus[0]
    elif k == taus.size:
        tau = taus[-1]
    else:
        t0, t1, m0, m1 = taus[k - 1], taus[k], means[k - 1], means[k]
        tau = t0 if m0 == m1 else t0 + (m0 - bias) * (t1 - t0) / (m0 - m1)
    return np.clip(u - tau, -1.0, 1.0)


def _face_newton_step(problem: PathProblem, vf, vg, lam: float, cfg: FPathConfig):
    """Second-order step on the current face.

    If ``L_lam`` is strictly concave on the face this is the Newton step to
    its maximizer over the affine hull, truncated at the box.  If it is
    indefinite, the iterate moves to whichever end of the face is better
    along the most convex direction, which lowers the face dimension.
    Returns ``None`` if neither applies or the objective does not improve.
    """
    cf, cg, _ = cfg.weights(lam)
    ff = np.flatnonzero(np.abs(vf) < 1.0 - FEAS_TOL)
    fg = np.flatnonzero(np.abs(vg) < 1.0 - FEAS_TOL)
    m, n = ff.size, fg.size
    if m + n == 0 or m + n > DENSE_EIG_LIMIT:
        return None
    wf, wg = problem.wx[ff], problem.wy[fg]
    hess = np.zeros((m + n, m + n))
    hess[:m, :m] = np.diag(2.0 * cf * wf)
    hess[m:, m:] = np.diag(2.0 * cg * wg)
    cross = problem.dense_j[np.ix_(ff, fg)]
    hess[:m, m:] = cross
    hess[m:, :m] = cross.T
    grad = np.concatenate([(problem.apply_j(vg) + 2.0 * cf * problem.wx * vf)[ff], (problem.apply_jt(vf) + 2.0 * cg * problem.wy * vg)[fg]])
    # orthonormal basis of the directions that keep both means fixed
    cons = np.zeros((m + n, 2))
    cons[:m, 0] = wf
    cons[m:, 1] = wg
    cons = cons[:, np.abs(cons).sum(axis=0) > 0]
    q_full, _ = np.linalg.qr(cons, mode="complete")
    z = q_full[:, cons.shape[1]:]
    if z.shape[1] == 0:
        return None
    reduced = z.T @ hess @ z
    evals, evecs = np.linalg.eigh(reduced)
    if evals[-1] < -1e-12:
        step = z @ np.linalg.solve(reduced, -(z.T @ grad))
        ends = (1.0,)
    elif evals[-1] > 1e-12:
        # indefinite on the face: the best point along the most convex direction is an endpoint
        step = z @ evecs[:, -1]
        ends = None
    else:
        return None
    df = np.zeros_like(vf)
    dg = np.zeros_like(vg)
    df[ff] = step[:m]
    dg[fg] = step[m:]
    lo, hi = -np.inf, np.inf
    for v, dv in ((vf, df), (vg, dg)):
        pos, neg = dv > 1e-15, dv < -1e-15
        if pos.any():
            hi = min(hi, np.min((1.0 - v[pos]) / dv[pos]))
            lo = max(lo, np.max((-1.0 - v[pos]) / dv[pos]))
        if neg.any():
            hi = min(hi, np.min((-1.0 - v[neg]) / dv[neg]))
            lo = max(lo, np.max((1.0 - v[neg]) / dv[neg]))
    slope, curv = grad @ step, step @ hess @ step
    candidates = (min(1.0, hi),) if ends else (lo, hi)
    best_t, best_gain = 0.0, 1e-15
    for t in candidates:
        if np.isfinite(t):
            gain = t * slope + 0.5 * t * t * curv
            if gain > best_gain:
                best_t, best_gain = t, gain
    if best_t == 0.0:
        return None
    return np.clip(vf + best_t * df, -1.0, 1.0), np.clip(vg + best_t * dg, -1.0, 1.0)


def _projected_gradient(problem: PathProblem, vf, vg, lam: float, cfg: FPathConfig, it: int, limit: int):
    """Projected-gradient ascent in the weighted metric with face Newton steps.

    Fallback once Frank-Wolfe stalls; the step ``1 / L`` uses a bound on the
    curvature of ``L_lam`` in that metric.  Returns the point, the updated
    iteration count and the Frank-Wolfe gap.
    """
    cf, cg, _ = cfg.weights(lam)
    wx, wy = problem.wx, problem.wy
    step = 1.0 / (1.0 + 2.0 * max(abs(cf), abs(cg)))
    gap = fw_gap(problem, vf, vg, lam, cfg)
    while gap >= cfg.fw_tol and it < limit:
        gf = problem.apply_j(vg) / wx + 2.0 * cf * vf
        gg = problem.apply_jt(vf) / wy + 2.0 * cg * vg
        vf = project_box_mean(vf + step * gf, wx, problem.bias_f)
        vg = project_box_mean(vg + step * gg, wy, problem.bias_g)
        it += 1
        if it % 8 == 0:
            moved = _face_newton_step(problem, vf, vg, lam, cfg)
            if moved is not None:
                vf, vg = moved
        gap = fw_gap(problem, vf, vg, lam, cfg)
    return vf, vg, it, gap


def frank_wolfe_maximize(problem: PathProblem, start_f, start_g, lam: float, cfg: FPathConfig) -> FWResult:
    """Conditional-gradient ascent on ``L_lam`` from a feasible start.

    Exact line search on the quadratic.  Frank-Wolfe converges slowly when
    the maximizer lies inside a face, so after ``cfg.fw_stall_iters``
    iterations without convergence the solve continues by projected
    gradient with exact Newton steps on the identified face.  A point with
    vanishing gap that is only a saddle is left along a direction of
    positive curvature and the solve restarts.  Stops once the gap is below
    ``cfg.fw_tol`` with no escape available, or when the budget
    ``cfg.fw_max_iters + cfg.pg_max_iters`` is spent.
    """
    vf = np.array(start_f, dtype=float)
    vg = np.array(start_g, dtype=float)
    if problem.violation(vf, vg) > FEAS_TOL:
        raise InfeasibleStartError(f"start violates the constraints by {problem.violation(vf, vg):.2e}")
    cf, cg, _ = cfg.weights(lam)
    wx, wy = problem.wx, problem.wy
    budget = cfg.fw_max_iters + cfg.pg_max_iters
    it = escapes = 0
    while True:
        jvg, jtvf = problem.apply_j(vg), problem.apply_jt(vf)
        gap = np.inf
        stall = it + cfg.fw_stall_iters
        while it < min(stall, cfg.fw_max_iters):
            gf = jvg + 2.0 * cf * wx * vf
            gg = jtvf + 2.0 * cg * wy * vg
            df = box_mean_lmo(gf, wx, problem.bias_f) - vf
            dg = box_mean_lmo(gg, wy, problem.bias_g) - vg
            gap = float(gf @ df + gg @ dg)
            if gap < cfg.fw_tol:
                break
            jdg, jtdf = problem.apply_j(dg), problem.apply_jt(df)
            curv = float(df @ jdg + cf * (wx @ (df * df)) + cg * (wy @ (dg * dg)))
            step = 1.0 if curv >= -1e-14 else min(1.0, gap / (-2.0 * curv))
            vf += step * df
            vg += step * dg
            jvg += step * jdg
            jtvf += step * jtdf
            it += 1
            if it % 64 == 0:
                jvg, jtvf = problem.apply_j(vg), problem.apply_jt(vf)
        if gap >= cfg.fw_tol and it < budget:
            vf, vg, it, gap = _projected_gradient(problem, vf, vg, lam, cfg, it, budget)
        if gap >= cfg.fw_tol or escapes >= cfg.max_escapes:
            break
        moved = _curvature_step(problem, vf, vg, lam, cfg)
        if moved is None:
            break
        vf, vg = moved
        escapes += 1
    return FWResult(vf, vg, float(gap), it, escapes)


def fw_gap(problem: PathProblem, vf, vg, lam: float, cfg: FPathConfig) -> float:
    cf, cg, _ = cfg.weights(lam)
    gf = problem.apply_j(vg) + 2.0 * cf * problem.wx * vf
    gg = problem.apply_jt(vf) + 2.0 * cg * problem.wy * vg
    df = box_mean_lmo(gf, problem.wx, problem.bias_f) - vf
    dg = box_mean_lmo(gg, problem.wy, problem.bias_g) - vg
    return float(gf @ df + gg @ dg)


# ---------------------------------------------------------------- path


@dataclass
class Certificate:
    lam_star: float
    boundary_lambda: float
    value: float
    gap: float


@dataclass
class Snapshot:
    lam: float
    vf: np.ndarray
    vg: np.ndarray


@dataclass
class FPathState:
    lam: float
    f: FourierVector
    g: FourierVector
    values_f: np.ndarray
    values_g: np.ndarray
    objective: float
    trace: dict
    boundary_flags: tuple[float, float]
    certificate: Certificate | None = None
    snapshots: list = field(default_factory=list, repr=False)
    config: FPathConfig | None = None
    notes: list = field(default_factory=list)

    @property
    def objective_trace(self) -> list[tuple[float, float]]:
        return list(zip(self.trace["lambda"].tolist(), self.trace["objective"].tolist()))

    def on_boundary(self, tol: float = BOUNDARY_TOL) -> bool:
        return abs(self.boundary_flags[0] - 1.0) <= tol and abs(self.boundary_flags[1] - 1.0) <= tol


def objective_lambda(f: FourierVector, g: FourierVector, inst: PrimalInstance, cfg: FPathConfig, lam: float) -> float:
    """``lam * L1 + (1 - lam) * L0`` evaluated from coefficient vectors."""
    from .maxcorr import primal_objective

    prim = primal_objective(f, g, inst)
    nf, ng = f.norm2(), g.norm2()
    l1 = prim + cfg.alpha1 * nf + cfg.beta1 * ng - cfg.alpha1 - cfg.beta1
    l0 = prim - cfg.alpha0 * nf - cfg.beta0 * ng + cfg.alpha0 + cfg.beta0
    return lam * l1 + (1.0 - lam) * l0


def validated_config(cfg: FPathConfig, kernel_norm: float) -> tuple[FPathConfig, list[str]]:
    """Widen the weights if ``L0`` would not be concave or ``L1`` not convex."""
    notes = []
    need = kernel_norm**2 / 4.0
    if cfg.alpha0 * cfg.beta0 < need:
        w = math.sqrt(need) * (1 + 1e-9)
        notes.append(f"alpha0/beta0 widened to {w:.6g} for concavity at lambda=0")
        cfg = replace(cfg, alpha0=max(cfg.alpha0, w), beta0=max(cfg.beta0, w))
    if cfg.alpha1 * cfg.beta1 < need:
        w = math.sqrt(need) * (1 + 1e-9)
        notes.append(f"alpha1/beta1 widened to {w:.6g} for convexity at lambda=1")
        cfg = replace(cfg, alpha1=max(cfg.alpha1, w), beta1=max(cfg.beta1, w))
    return cfg, notes


def concavity_threshold(cfg: FPathConfig, kernel_norm: float) -> float | None:
    """Largest ``lam`` for which ``L_lam`` is concave on the feasible directions."""

    def concave(lam):
        cf, cg, _ = cfg.weights(lam)
        return cf <= 0 and cg <= 0 and 4.0 * cf * cg >= kernel_norm**2

    if not concave(0.0):
        return None
    lo, hi = 0.0, 1.0
    if concave(hi):
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if concave(mid) else (lo, mid)
    return lo


def fpath_solve(inst: PrimalInstance, cfg: FPathConfig = FPathConfig(), problem: PathProblem | None = None) -> FPathState:
    """Run the path from the concave relaxation (lam=0) to the convexified objective (lam=1).

    The iterate is re-solved by Frank-Wolfe, warm-started at the current
    iterate, whenever ``L_lam`` at the current iterate has moved by at least
    ``eps_lambda`` since the last solve.  The final iterate is re-solved at
    ``lam = 1`` when ``cfg.final_resolve`` is set and the path did not end
    on a solve.
    """
    problem = problem or PathProblem.from_instance(inst)
    cfg, notes = validated_config(cfg, problem.kernel_norm)
    vf, vg = problem.center()
    res = frank_wolfe_maximize(problem, vf, vg, 0.0, cfg)
    vf, vg = res.vf, res.vg
    prim, nf, ng = problem.parts(vf, vg)
    snapshots = [Snapshot(0.0, vf.copy(), vg.copy())]

    n_steps = int(math.ceil(1.0 / cfg.d_lambda - 1e-9))
    lam_col = np.empty(n_steps + 1)
    obj_col = np.empty(n_steps + 1)
    nf_col = np.empty(n_steps + 1)
    ng_col = np.empty(n_steps + 1)
    flag_col = np.zeros(n_steps + 1, dtype=np.int8)

    def lval(lam):
        cf, cg, k = cfg.weights(lam)
        return prim + cf * nf + cg * ng + k

    lam_col[0], obj_col[0], nf_col[0], ng_col[0], flag_col[0] = 0.0, lval(0.0), nf, ng, 1
    ref_value = obj_col[0]
    for step in range(1, n_steps + 1):
        lam = min(1.0, step * cfg.d_lambda)
        new_value = lval(lam)
        if abs(new_value - ref_value) >= cfg.eps_lambda:
            res = frank_wolfe_maximize(problem, vf, vg, lam, cfg)
            vf, vg = res.vf, res.vg
            prim, nf, ng = problem.parts(vf, vg)
            new_value = lval(lam)
            ref_value = new_value
            flag_col[step] = 1
            snapshots.append(Snapshot(lam, vf.copy(), vg.copy()))
        lam_col[step], obj_col[step], nf_col[step], ng_col[step] = lam, new_value, nf, ng
    if cfg.final_resolve and not flag_col[-1]:
        res = frank_wolfe_maximize(problem, vf, vg, 1.0, cfg)
        vf, vg = res.vf, res.vg
        prim, nf, ng = problem.parts(vf, vg)
        obj_col[-1], nf_col[-1], ng_col[-1], flag_col[-1] = lval(1.0), nf, ng, 1
        snapshots.append(Snapshot(1.0, vf.copy(), vg.copy()))

    trace = {"lambda": lam_col, "objective": obj_col, "f_norm": nf_col, "g_norm": ng_col, "resolve_flag": flag_col}
    f = fourier_transform(vf, inst.basis_x)
    g = fourier_transform(vg, inst.basis_y)
    state = FPathState(1.0, f, g, vf, vg, prim, trace, (nf, ng), None, snapshots, cfg, notes)
    state.certificate = optimality_certificate(state, inst, cfg, problem)
    return state


def optimality_certificate(state: FPathState, inst: PrimalInstance, cfg: FPathConfig | None = None, problem: PathProblem | None = None) -> Certificate | None:
    """Global optimality certificate for a boundary iterate.

    Takes the earliest solved iterate with both squared norms equal to 1
    (within 1e-6).  If it maximizes a concave ``L_lam*`` for some
    ``lam* <= lam_concave`` (checked by a vanishing Frank-Wolfe gap, which
    bounds the suboptimality of a concave objective), then it maximizes
    ``L_1`` and hence the bilinear objective.
    """
    problem = problem or PathProblem.from_instance(inst)
    cfg = state.config or cfg or FPathConfig()
    lam_c = concavity_threshold(cfg, problem.kernel_norm)
    if lam_c is None or lam_c <= 0.0:
        return None
    for snap in state.snapshots:
        _, nf, ng = problem.parts(snap.vf, snap.vg)
        if abs(nf - 1.0) > BOUNDARY_TOL or abs(ng - 1.0) > BOUNDARY_TOL:
            continue
        candidates = [snap.lam] if 0.0 < snap.lam <= lam_c else []
        candidates.append(min(lam_c, 1.0 - 1e-12))
        for lam_star in candidates:
            gap = fw_gap(problem, snap.vf, snap.vg, lam_star, cfg)
            if gap <= 1e-9:
                return Certificate(lam_star, snap.lam, problem.parts(snap.vf, snap.vg)[0], gap)
        return None
    return None


def export_trace_csv(state: FPathState, path) -> None:
    from .report import write_csv

    cols = ["lambda", "objective", "f_norm", "g_norm", "resolve_flag"]
    rows = zip(*(state.trace[c] for c in cols))
    write_csv(path, cols, rows)
