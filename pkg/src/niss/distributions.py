"""Finite joint distributions, output targets and the expectation-vector map.

Binary alphabets are embedded as ``(-1, +1)`` (index 0 is ``-1``); larger
alphabets as ``0, 1, ..., q-1``.  Output alphabets are plain labels
``0, ..., |U|-1``.

Total variation distance here is the *unhalved* sum ``sum |p - q|`` with
range ``[0, 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12


class DimensionError(ValueError):
    """Two objects live on different alphabets."""


class DegenerateMarginalError(ValueError):
    """A marginal has zero variance where a nonzero one is required."""


class InfeasibleExpectationError(ValueError):
    """An expectation vector does not correspond to any probability table."""


def default_embedding(q: int) -> np.ndarray:
    """Real values attached to the points of a ``q``-ary alphabet."""
    if q == 2:
        return np.array([-1.0, 1.0])
    return np.arange(q, dtype=float)


def _frozen_table(p, name: str) -> np.ndarray:
    arr = np.array(p, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"{name} must be a matrix with both sides of size >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if arr.min() < -SIMPLEX_TOL:
        raise ValueError(f"{name} has a negative entry {arr.min():.3e}")
    total = arr.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} entries sum to {total!r}, not 1 (renormalization is refused)")
    arr = np.where(arr < 0, 0.0, arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _PmfTable:
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen_table(self.p, type(self).__name__))

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @property
    def row_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def __eq__(self, other):
        return type(self) is type(other) and self.p.shape == other.p.shape and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((type(self).__name__, self.p.shape, self.p.tobytes()))


class JointPmf(_PmfTable):
    """Input joint pmf ``P_XY`` stored as a ``q_x x q_y`` matrix."""

    @property
    def qx(self) -> int:
        return self.p.shape[0]

    @property
    def qy(self) -> int:
        return self.p.shape[1]

    @property
    def px(self) -> np.ndarray:
        return self.row_marginal

    @property
    def py(self) -> np.ndarray:
        return self.col_marginal

    def is_uniform(self, tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.px, 1.0 / self.qx, atol=tol, rtol=0)
            and np.allclose(self.py, 1.0 / self.qy, atol=tol, rtol=0)
        )

    def power(self, d: int) -> np.ndarray:
        """Dense joint of ``(X^d, Y^d)`` under IID repetition, lexicographic index."""
        out = np.ones((1, 1))
        for _ in range(d):
            out = np.kron(out, self.p)
        return out


class TargetPmf(_PmfTable):
    """Output joint pmf ``Q_UV`` over labels ``0..|U|-1`` and ``0..|V|-1``."""

    @property
    def nu(self) -> int:
        return self.p.shape[0]

    @property
    def nv(self) -> int:
        return self.p.shape[1]

    @property
    def qu(self) -> np.ndarray:
        return self.row_marginal

    @property
    def qv(self) -> np.ndarray:
        return self.col_marginal


@dataclass(frozen=True, eq=False)
class ExpectationVector:
    """Centered cross expectations ``e[u, v] = E[f_u g_v]`` with output biases."""

    e: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name in ("e", "mu", "nu"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.e.shape != (self.mu.size, self.nu.size):
            raise DimensionError("expectation matrix does not match bias lengths")


def tv_distance(p: _PmfTable, q: _PmfTable) -> float:
    """Unhalved total variation ``sum |p - q|``."""
    if p.p.shape != q.p.shape:
        raise DimensionError(f"alphabet mismatch {p.p.shape} vs {q.p.shape}")
    return float(np.abs(p.p - q.p).sum())


def pearson_correlation(joint: _PmfTable, embed_x=None, embed_y=None) -> float:
    """Pearson correlation of the embedded pair under ``joint``."""
    p = joint.p
    ex = default_embedding(p.shape[0]) if embed_x is None else np.asarray(embed_x, dtype=float)
    ey = default_embedding(p.shape[1]) if embed_y is None else np.asarray(embed_y, dtype=float)
    px, py = p.sum(axis=1), p.sum(axis=0)
    mx, my = px @ ex, py @ ey
    vx = px @ (ex - mx) ** 2
    vy = py @ (ey - my) ** 2
    if vx <= 1e-15 or vy <= 1e-15:
        raise DegenerateMarginalError("embedded variable has zero variance")
    cov = (ex - mx) @ p @ (ey - my)
    return float(np.clip(cov / np.sqrt(vx * vy), -1.0, 1.0))


def psi_map(q: TargetPmf) -> ExpectationVector:
    qu, qv = q.qu, q.qv
    e = 4.0 * q.p - 2.0 * qu[:, None] - 2.0 * qv[None, :] + 1.0
    return ExpectationVector(e, 2.0 * qu - 1.0, 2.0 * qv - 1.0)


def psi_inverse(ev: ExpectationVector) -> TargetPmf:
    qu = (1.0 + ev.mu) / 2.0
    qv = (1.0 + ev.nu) / 2.0
    table = (ev.e + 2.0 * qu[:, None] + 2.0 * qv[None, :] - 1.0) / 4.0
    try:
        return TargetPmf(table)
    except ValueError as exc:
        raise InfeasibleExpectationError(str(exc)) from exc


def star_mix(q: TargetPmf, lam: float) -> TargetPmf:
    """``lam * q + (1 - lam) * (Q_U x Q_V)``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("mixing weight must lie in [0, 1]")
    prod = np.outer(q.qu, q.qv)
    mixed = lam * q.p + (1.0 - lam) * prod
    # keep the sum exact so the simplex check cannot trip on rounding
    mixed = mixed + (1.0 - mixed.sum()) * prod
    return TargetPmf(mixed)


def product_pmf(px, py, cls=JointPmf):
    return cls(np.outer(np.asarray(px, float), np.asarray(py, float)))


def binary_joint(px1: float, py1: float, rho: float) -> JointPmf:
    """Binary joint with ``P(X=+1)=px1``, ``P(Y=+1)=py1`` and Pearson correlation ``rho``."""
    cov = rho * np.sqrt(px1 * (1 - px1) * py1 * (1 - py1))
    p11 = px1 * py1 + cov
    p10 = px1 - p11
    p01 = py1 - p11
    p00 = 1.0 - p11 - p10 - p01
    return JointPmf([[p00, p01], [p10, p11]])


def dsbs(rho: float) -> JointPmf:
    """Doubly symmetric binary source with correlation ``rho``."""
    same = (1.0 + rho) / 4.0
    diff = (1.0 - rho) / 4.0
    return JointPmf([[same, diff], [diff, same]])


def binary_target(qu1: float, qv1: float, p11: float) -> TargetPmf:
    """Binary output table from the two marginals and ``Q(1,1)``."""
    p10 = qu1 - p11
    p01 = qv1 - p11
    return TargetPmf([[1.0 - qu1 - p01, p01], [p10, p11]])
