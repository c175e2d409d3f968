"""Maximal, biased and directional maximal correlation: instances, objectives, feasibility."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import DegenerateMarginalError, JointPmf, TargetPmf
from .fourier import (
    CrossCorrelationMatrix,
    FourierVector,
    OrthonormalBasis,
    cross_correlation,
    gram_schmidt_basis,
    inner_product_fourier,
    inverse_transform,
    support_sizes,
)

FEAS_TOL = 1e-9


class ConstraintViolationError(ValueError):
    """A coefficient vector does not carry the instance bias."""


class ProductTargetError(ValueError):
    """The target is a product distribution, so it has no direction."""


def _bias_check(b: float) -> float:
    if not -1.0 <= b <= 1.0:
        raise ValueError(f"bias {b} outside [-1, 1]")
    return float(b)


@dataclass(frozen=True, eq=False)
class PrimalInstance:
    """Biased maximal correlation problem at block length ``d``.

    ``qu1`` and ``qv1`` are the target output probabilities ``Q_U(1)`` and
    ``Q_V(1)``; the pinned first coefficients are ``2 Q(1) - 1``.
    """

    joint: JointPmf
    d: int
    qu1: float
    qv1: float
    basis_x: OrthonormalBasis = None
    basis_y: OrthonormalBasis = None
    rho: CrossCorrelationMatrix = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("block length must be at least 1")
        if not (0.0 <= self.qu1 <= 1.0 and 0.0 <= self.qv1 <= 1.0):
            raise ValueError("output probabilities must lie in [0, 1]")
        if self.basis_x is None:
            object.__setattr__(self, "basis_x", gram_schmidt_basis(self.joint.px))
        if self.basis_y is None:
            object.__setattr__(self, "basis_y", gram_schmidt_basis(self.joint.py))
        rho = cross_correlation(self.joint, self.basis_x, self.basis_y)
        if self.rho is None:
            object.__setattr__(self, "rho", rho)
        elif np.abs(self.rho.rho - rho.rho).max() > 1e-10:
            raise ValueError("correlation matrix is inconsistent with the joint and bases")

    @property
    def q_u_bias(self) -> float:
        return _bias_check(2.0 * self.qu1 - 1.0)

    @property
    def q_v_bias(self) -> float:
        return _bias_check(2.0 * self.qv1 - 1.0)

    def bias_only(self) -> tuple[FourierVector, FourierVector]:
        f = np.zeros(self.joint.qx**self.d)
        g = np.zeros(self.joint.qy**self.d)
        f[0], g[0] = self.q_u_bias, self.q_v_bias
        return FourierVector(self.d, self.joint.qx, f), FourierVector(self.d, self.joint.qy, g)


@dataclass(frozen=True)
class Membership:
    feasible: bool
    max_abs: float
    violation: float
    bias_error: float


def check_membership(v: FourierVector, basis: OrthonormalBasis, bias: float) -> Membership:
    """Is ``v`` in the feasible set with first coefficient ``bias``?"""
    values = inverse_transform(v, basis).values
    max_abs = float(np.abs(values).max())
    violation = max(0.0, max_abs - 1.0)
    bias_error = abs(v.coeffs[0] - bias)
    return Membership(violation <= FEAS_TOL and bias_error <= FEAS_TOL, max_abs, violation, float(bias_error))


def primal_objective(f: FourierVector, g: FourierVector, inst: PrimalInstance) -> float:
    if abs(f.coeffs[0] - inst.q_u_bias) > FEAS_TOL or abs(g.coeffs[0] - inst.q_v_bias) > FEAS_TOL:
        raise ConstraintViolationError("coefficient vectors do not carry the instance biases")
    return inner_product_fourier(f, g, inst.rho)


def equibiased_objective(f: FourierVector, rho: float) -> float:
    """``sum_S f_S^2 rho^|S|`` for binary inputs."""
    if f.q != 2:
        raise ValueError("the equal-bias objective is defined for binary inputs")
    return float(np.sum(f.coeffs**2 * rho ** support_sizes(f.d, 2)))


def hgr_maximal_correlation(joint: JointPmf) -> float:
    """Second singular value of ``P(x, y) / sqrt(P(x) P(y))``."""
    px, py = joint.px, joint.py
    if px.min() <= 0 or py.min() <= 0:
        raise DegenerateMarginalError("a marginal has a zero-probability point")
    s = np.linalg.svd(joint.p / np.sqrt(np.outer(px, py)), compute_uv=False)
    return float(min(1.0, s[1])) if s.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class SingleLetterResult:
    """``rho_star`` is the maximal (HGR) correlation; ``achieved`` is what
    single-letter functions bounded by 1 in absolute value with zero mean
    reach, with their coefficients on the non-constant basis functions."""

    rho_star: float
    f_coeffs: np.ndarray
    g_coeffs: np.ndarray
    achieved: float
    basis_x: OrthonormalBasis = field(repr=False)
    basis_y: OrthonormalBasis = field(repr=False)


def maximal_correlation_single_letter(joint: JointPmf, cfg=None) -> SingleLetterResult:
    px, py = joint.px, joint.py
    if px.min() <= 0 or py.min() <= 0:
        raise DegenerateMarginalError("a marginal has a zero-probability point")
    rho_star = hgr_maximal_correlation(joint)
    if joint.qx == 2 and joint.qy == 2:
        bx, by = gram_schmidt_basis(px), gram_schmidt_basis(py)
        r = cross_correlation(joint, bx, by).rho[1, 1]
        mx, my = px @ [-1.0, 1.0], py @ [-1.0, 1.0]
        sx, sy = np.sqrt(1.0 - mx * mx), np.sqrt(1.0 - my * my)
        # f(X) = (X - E X) / (1 + |E X|) has coefficient sigma / (1 + |mu|) on psi_1
        f1 = sx / (1.0 + abs(mx))
        g1 = sy / (1.0 + abs(my))
        if r < 0:
            g1 = -g1
        return SingleLetterResult(rho_star, np.array([f1]), np.array([g1]), float(f1 * g1 * r), bx, by)
    from .fpath import FPathConfig, fpath_solve

    inst = PrimalInstance(joint, 1, 0.5, 0.5)
    state = fpath_solve(inst, cfg or FPathConfig())
    return SingleLetterResult(
        rho_star, state.f.coeffs[1:].copy(), state.g.coeffs[1:].copy(), state.objective, inst.basis_x, inst.basis_y
    )


# ---------------------------------------------------------------- directions


@dataclass(frozen=True, eq=False)
class DirectionVector:
    """Unit direction ``alpha`` over ``U_phi x V_phi`` (labels ``1..|U|-1``)."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        if a.ndim != 2:
            raise ValueError("direction must be a matrix")
        if abs(np.sum(a * a) - 1.0) > 1e-9:
            raise ValueError("direction must have unit norm")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    def reference(self) -> tuple[int, int]:
        """The ``(1, 1)`` entry, or the first nonzero entry in row-major order."""
        if abs(self.alpha[0, 0]) > 1e-12:
            return (0, 0)
        flat = np.flatnonzero(np.abs(self.alpha.ravel()) > 1e-12)
        return tuple(int(i) for i in np.unravel_index(flat[0], self.alpha.shape))


def centered_cross(q: TargetPmf) -> np.ndarray:
    """``beta[u, v] = 4 (Q(u, v) - Q_U(u) Q_V(v))`` over nonzero labels."""
    return 4.0 * (q.p - np.outer(q.qu, q.qv))[1:, 1:]


def direction_of_target(q: TargetPmf) -> tuple[DirectionVector, float]:
    """Direction ``beta / |beta|`` and magnitude ``t = |beta|`` of the target."""
    beta = centered_cross(q)
    t = float(np.linalg.norm(beta))
    if t <= 1e-14:
        raise ProductTargetError("target equals the product of its marginals")
    return DirectionVector(beta / t), t


def target_from_direction(alpha: DirectionVector, t: float, qu, qv) -> TargetPmf:
    """The unique table with given marginals, direction and magnitude."""
    qu, qv = np.asarray(qu, float), np.asarray(qv, float)
    inner = np.outer(qu, qv)
    dev = np.zeros_like(inner)
    dev[1:, 1:] = t * alpha.alpha / 4.0
    dev[0, 1:] = -dev[1:, 1:].sum(axis=0)
    dev[1:, 0] = -dev[1:, 1:].sum(axis=1)
    dev[0, 0] = dev[1:, 1:].sum()
    return TargetPmf(inner + dev)


@dataclass(frozen=True, eq=False)
class DirectionalInstance:
    """Directional problem: input joint, block length and output marginals."""

    joint: JointPmf
    d: int
    qu: np.ndarray
    qv: np.ndarray

    def __post_init__(self):
        for name in ("qu", "qv"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.size < 2 or abs(arr.sum() - 1) > 1e-12 or arr.min() < 0:
                raise ValueError(f"{name} is not a pmf")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "basis_x", gram_schmidt_basis(self.joint.px))
        object.__setattr__(self, "basis_y", gram_schmidt_basis(self.joint.py))
        object.__setattr__(self, "rho", cross_correlation(self.joint, self.basis_x, self.basis_y))

    @property
    def mu(self) -> np.ndarray:
        return 2.0 * self.qu - 1.0

    @property
    def nu(self) -> np.ndarray:
        return 2.0 * self.qv - 1.0


@dataclass(frozen=True)
class DirectionalReport:
    objective: float
    residuals: np.ndarray
    box_violation: float
    aggregate_violation: float
    bias_error: float

    @property
    def feasible(self) -> bool:
        return max(np.abs(self.residuals).max(initial=0.0), self.box_violation, self.aggregate_violation, self.bias_error) <= 1e-8


def directional_objective_and_constraints(f_family, g_family, inst: DirectionalInstance, alpha: DirectionVector) -> DirectionalReport:
    """Evaluate the directional objective for families over nonzero labels.

    The member for label 0 is implied by ``sum_u f_u = 2 - |U|`` and must stay
    within ``[-1, 1]``; its excess is the aggregate violation.
    """
    nu, nv = inst.qu.size, inst.qv.size
    if len(f_family) != nu - 1 or len(g_family) != nv - 1:
        raise ValueError("family sizes must be |U|-1 and |V|-1")
    mu, nuv = inst.mu, inst.nu
    cross = np.array([[inner_product_fourier(f, g, inst.rho) for g in g_family] for f in f_family])
    centered = cross - np.outer(mu[1:], nuv[1:])
    r = alpha.reference()
    objective = float(centered[r] / alpha.alpha[r])
    residuals = centered - objective * alpha.alpha
    box, agg = 0.0, 0.0
    for fam, basis, size in ((f_family, inst.basis_x, nu), (g_family, inst.basis_y, nv)):
        vals = np.array([inverse_transform(v, basis).values for v in fam])
        box = max(box, float(np.abs(vals).max()) - 1.0)
        implied = (2.0 - size) - vals.sum(axis=0)
        agg = max(agg, float(np.abs(implied).max()) - 1.0)
    bias_error = max(
        max(abs(f.coeffs[0] - mu[u + 1]) for u, f in enumerate(f_family)),
        max(abs(g.coeffs[0] - nuv[v + 1]) for v, g in enumerate(g_family)),
    )
    return DirectionalReport(objective, residuals, max(0.0, box), max(0.0, agg), float(bias_error))
