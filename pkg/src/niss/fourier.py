"""Fourier analysis on finite product probability spaces.

A function on ``X^d`` is tabulated as a vector of length ``q**d`` in
lexicographic order of ``x^d`` with ``x_1`` most significant.  Coefficient
vectors use the same order over multi-indices ``s^d``.  For ``q = 2`` a subset
``S`` of coordinates corresponds to the multi-index with ``s_i = 1`` iff
``i`` is in ``S``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .distributions import DimensionError, JointPmf, default_embedding

ORTHO_TOL = 1e-10
DEGENERATE_TOL = 1e-10
MAX_DENSE = 2**20


class DegenerateBasisError(ValueError):
    """Seed functions are linearly dependent under the given marginal."""


def _readonly(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------- indexing


def multi_indices(d: int, q: int) -> np.ndarray:
    """All ``s^d`` in canonical order, shape ``(q**d, d)``."""
    if q**d > MAX_DENSE:
        raise ValueError(f"q^d = {q**d} exceeds the dense storage limit {MAX_DENSE}")
    return np.array(list(itertools.product(range(q), repeat=d)), dtype=np.int64).reshape(q**d, d)


def subset_to_index(subset, d: int) -> int:
    """Position of the multi-index of ``subset`` (1-based coordinates) for q = 2."""
    idx = 0
    for i in subset:
        if not 1 <= i <= d:
            raise ValueError(f"coordinate {i} outside 1..{d}")
        idx |= 1 << (d - i)
    return idx


def index_to_subset(index: int, d: int) -> tuple[int, ...]:
    return tuple(i for i in range(1, d + 1) if index >> (d - i) & 1)


def support_sizes(d: int, q: int) -> np.ndarray:
    """Number of nonzero entries of every multi-index."""
    return (multi_indices(d, q) != 0).sum(axis=1)


def kron_apply(mat, vec, d: int) -> np.ndarray:
    """Apply ``mat`` tensored ``d`` times to ``vec`` without forming the product.

    ``mat`` has shape ``(m, q)`` and ``vec`` length ``q**d``; the result has
    length ``m**d``.  Cost is ``O(d m q^d)``.
    """
    mat = np.asarray(mat, dtype=float)
    m, q = mat.shape
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (q**d,):
        raise DimensionError(f"vector of length {vec.shape} does not match {q}^{d}")
    if d == 0:
        return vec.copy()
    t = vec.reshape((q,) * d)
    for axis in range(d):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(m**d)


def kron_power(mat, d: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(d):
        out = np.kron(out, mat)
    return out


# ---------------------------------------------------------------- types


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Tabulated orthonormal functions ``psi[s, x]`` under ``weights``; ``psi[0] == 1``."""

    psi: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", _readonly(self.psi))
        object.__setattr__(self, "weights", _readonly(self.weights))
        q = self.weights.size
        if self.psi.shape != (q, q):
            raise DimensionError("basis table must be q x q")
        gram = (self.psi * self.weights) @ self.psi.T
        err = np.abs(gram - np.eye(q)).max()
        if err > ORTHO_TOL:
            raise DegenerateBasisError(f"basis is not orthonormal (error {err:.2e})")
        if not np.allclose(self.psi[0], 1.0, atol=ORTHO_TOL, rtol=0):
            raise ValueError("first basis function must be the constant 1")

    @property
    def q(self) -> int:
        return self.weights.size

    def orthonormality_error(self) -> float:
        gram = (self.psi * self.weights) @ self.psi.T
        return float(np.abs(gram - np.eye(self.q)).max())


@dataclass(frozen=True, eq=False)
class CrossCorrelationMatrix:
    """``rho[s, t] = E[psi_s(X) psi'_t(Y)]`` for a single coordinate."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _readonly(self.rho))

    @property
    def q(self) -> int:
        return self.rho.shape[0]

    def boolean_value(self, tol: float = 1e-14) -> float | None:
        """The scalar ``rho`` when the matrix is ``diag(1, rho)``, else ``None``."""
        r = self.rho
        if r.shape != (2, 2) or abs(r[0, 1]) > tol or abs(r[1, 0]) > tol:
            return None
        return float(r[1, 1])

    def offconstant_norm(self) -> float:
        """Spectral norm of the block orthogonal to constants."""
        block = self.rho[1:, 1:]
        return float(np.linalg.norm(block, 2)) if block.size else 0.0


@dataclass(frozen=True, eq=False)
class FourierVector:
    d: int
    q: int
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _readonly(self.coeffs))
        if self.coeffs.shape != (self.q**self.d,):
            raise DimensionError(f"expected {self.q**self.d} coefficients, got {self.coeffs.shape}")

    @property
    def bias(self) -> float:
        return float(self.coeffs[0])

    def norm2(self) -> float:
        return float(self.coeffs @ self.coeffs)

    def __eq__(self, other):
        return (
            isinstance(other, FourierVector)
            and (self.d, self.q) == (other.d, other.q)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TruthTable:
    """Values of a function on ``X^d``.

    ``out_size`` is ``None`` for real-valued tables (including ±1 and
    randomized tables) and the output alphabet size for label-valued ones.
    """

    d: int
    q: int
    values: np.ndarray
    out_size: int | None = None

    def __post_init__(self):
        vals = np.array(self.values)
        vals = vals.astype(np.int64 if self.out_size is not None else float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.q**self.d,):
            raise DimensionError(f"expected {self.q**self.d} values, got {vals.shape}")
        if self.out_size is not None and (vals.min() < 0 or vals.max() >= self.out_size):
            raise ValueError("label outside the output alphabet")

    def is_pm1(self) -> bool:
        return self.out_size is None and bool(np.all(np.abs(self.values) == 1.0))

    def accepted(self) -> np.ndarray:
        """Indices where a ±1 table equals +1."""
        return np.flatnonzero(self.values > 0)

    def __eq__(self, other):
        return (
            isinstance(other, TruthTable)
            and (self.d, self.q, self.out_size) == (other.d, other.q, other.out_size)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


# ---------------------------------------------------------------- bases


def default_seeds(q: int) -> np.ndarray:
    """``{1, x}`` for binary alphabets, ``{1, 1(x=0), ..., 1(x=q-2)}`` otherwise."""
    if q == 2:
        return np.vstack([np.ones(2), default_embedding(2)])
    seeds = np.zeros((q, q))
    seeds[0] = 1.0
    for k in range(1, q):
        seeds[k, k - 1] = 1.0
    return seeds


def gram_schmidt_basis(marginal, seed_functions=None) -> OrthonormalBasis:
    """Orthonormalize ``seed_functions`` (rows, tabulated on the alphabet) under ``marginal``.

    Each output function keeps the orientation of its seed, i.e. it has a
    positive inner product with the seed it came from.
    """
    w = np.asarray(marginal, dtype=float)
    q = w.size
    seeds = default_seeds(q) if seed_functions is None else np.asarray(seed_functions, dtype=float)
    if seeds.shape != (q, q):
        raise DimensionError(f"need {q} seed functions of length {q}")
    if not np.allclose(seeds[0], seeds[0][0]) or seeds[0][0] == 0:
        raise ValueError("first seed must be a nonzero constant")
    if w.min() <= 0:
        raise DegenerateBasisError("marginal has a zero-probability point")
    out = np.zeros((q, q))
    for k in range(q):
        v = seeds[k].copy()
        # two passes of projection keep the result orthogonal to 1e-15
        for _ in range(2):
            for j in range(k):
                v -= (w @ (v * out[j])) * out[j]
        norm = np.sqrt(w @ (v * v))
        if norm < DEGENERATE_TOL:
            raise DegenerateBasisError(f"seed {k} is linearly dependent on the previous ones")
        out[k] = v / norm
    out[0] = 1.0
    return OrthonormalBasis(out, w)


def binary_basis(p1: float) -> OrthonormalBasis:
    """Basis ``{1, (x - mu)/sigma}`` for a binary marginal with ``P(+1) = p1``."""
    return gram_schmidt_basis([1.0 - p1, p1])


def cross_correlation(joint: JointPmf, basis_x: OrthonormalBasis, basis_y: OrthonormalBasis) -> CrossCorrelationMatrix:
    if basis_x.q != joint.qx or basis_y.q != joint.qy:
        raise DimensionError("basis sizes do not match the joint")
    return CrossCorrelationMatrix(basis_x.psi @ joint.p @ basis_y.psi.T)


# ---------------------------------------------------------------- transforms


def fourier_transform(f, basis: OrthonormalBasis, marginal=None) -> FourierVector:
    """Coefficients ``f_s = E[f(X^d) phi_s(X^d)]`` under the product of ``basis.weights``."""
    if marginal is not None and not np.allclose(marginal, basis.weights, atol=1e-15, rtol=0):
        raise ValueError("marginal does not match the basis weights")
    q = basis.q
    values = f.values if isinstance(f, TruthTable) else np.asarray(f, dtype=float)
    d = int(round(np.log(values.size) / np.log(q)))
    if q**d != values.size:
        raise DimensionError("table length is not a power of q")
    return FourierVector(d, q, kron_apply(basis.psi * basis.weights, values.astype(float), d))


def inverse_transform(v: FourierVector, basis: OrthonormalBasis) -> TruthTable:
    if v.q != basis.q:
        raise DimensionError("coefficient alphabet does not match the basis")
    return TruthTable(v.d, v.q, kron_apply(basis.psi.T, v.coeffs, v.d))


def inner_product_fourier(f: FourierVector, g: FourierVector, rho: CrossCorrelationMatrix, method: str = "auto") -> float:
    """``E[f(X^d) g(Y^d)]`` from the two coefficient vectors.

    ``method`` is ``"auto"``, ``"boolean"`` (``sum f_S g_S rho^|S|``),
    ``"structured"`` (tensor kernel applied axis by axis) or ``"dense"``.
    """
    if (f.d, f.q) != (g.d, g.q) or rho.q != f.q:
        raise DimensionError("mismatched coefficient vectors or kernel")
    r = rho.boolean_value()
    if method == "auto":
        method = "boolean" if r is not None else "structured"
    if method == "boolean":
        if r is None:
            raise ValueError("boolean path needs a diag(1, rho) kernel")
        weights = r ** support_sizes(f.d, 2)
        return float(np.sum(f.coeffs * g.coeffs * weights))
    if method == "structured":
        return float(f.coeffs @ kron_apply(rho.rho, g.coeffs, f.d))
    if method == "dense":
        return float(f.coeffs @ kron_power(rho.rho, f.d) @ g.coeffs)
    raise ValueError(f"unknown method {method!r}")


def indicator_decompose(f: TruthTable) -> list[TruthTable]:
    """``f_u = 2 * 1(f = u) - 1`` for every output label ``u``."""
    if f.out_size is None:
        raise ValueError("indicator decomposition needs a label-valued table")
    return [TruthTable(f.d, f.q, np.where(f.values == u, 1.0, -1.0)) for u in range(f.out_size)]
