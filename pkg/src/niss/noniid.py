"""Executable models for three non-IID sources.

* one shared fair bit plus unlimited local randomness,
* outcomes of measuring a maximally entangled qubit pair,
* a pair of binary Markov chains started from a common uniform bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import JointPmf
from .fourier import OrthonormalBasis, gram_schmidt_basis, multi_indices
from .protocol import RandomizedFunction

MARKOV_BASIS_CAP = 10
MARKOV_JOINT_CAP = 12


class ZeroVarianceError(ValueError):
    """A flip indicator is deterministic, so its normalized version does not exist."""


# ---------------------------------------------------------------- shared bit


@dataclass(frozen=True)
class CommonRandomnessRegion:
    """Reachable agreement probabilities for output biases ``a = Q_U(1)``, ``b = Q_V(1)``."""

    a: float
    b: float
    zeta: float
    beta: float
    f1_bounds: tuple[float, float]
    g1_bounds: tuple[float, float]

    @property
    def agreement_interval(self) -> tuple[float, float]:
        return (2.0 - self.zeta - self.beta) / 2.0, (2.0 - self.zeta + self.beta) / 2.0

    def contains(self, agreement: float, tol: float = 1e-12) -> bool:
        lo, hi = self.agreement_interval
        return lo - tol <= agreement <= hi + tol


def cr_region(a: float, b: float) -> CommonRandomnessRegion:
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError("output biases must lie in [0, 1]")
    zeta = 1.0 - (2 * a - 1) * (2 * b - 1)
    beta = min(2 * a, 2 * (1 - a)) * min(2 * b, 2 * (1 - b))
    f1 = (max(-2 * a, -2 * (1 - a)), min(2 * (1 - a), 2 * a))
    g1 = (max(-2 * b, -2 * (1 - b)), min(2 * (1 - b), 2 * b))
    return CommonRandomnessRegion(a, b, zeta, beta, f1, g1)


def shared_bit_source() -> JointPmf:
    """Both agents see the same fair bit."""
    return JointPmf([[0.5, 0.0], [0.0, 0.5]])


def cr_endpoint_families(a: float, b: float, upper: bool = True) -> tuple[RandomizedFunction, RandomizedFunction]:
    """Families on the shared bit that reach one end of the agreement interval.

    Both use the extreme coefficient on the shared bit; the signs agree for
    the upper end and oppose for the lower end.
    """
    reg = cr_region(a, b)
    z = np.array([-1.0, 1.0])
    f = (2 * a - 1) + reg.f1_bounds[1] * z
    g = (2 * b - 1) + (1.0 if upper else -1.0) * reg.g1_bounds[1] * z
    return RandomizedFunction.binary(1, 2, np.clip(f, -1, 1)), RandomizedFunction.binary(1, 2, np.clip(g, -1, 1))


# ---------------------------------------------------------------- entangled pair


def bell_measurement_joint(theta: float, theta_prime: float) -> JointPmf:
    """Outcome law of two projective measurements at angles ``theta``, ``theta_prime``."""
    for ang in (theta, theta_prime):
        if not 0.0 <= ang <= 2 * math.pi + 1e-12:
            raise ValueError("angles must lie in [0, 2 pi]")
    c2 = math.cos(theta_prime - theta) ** 2 / 2.0
    s2 = math.sin(theta - theta_prime) ** 2 / 2.0
    # c2 + s2 = 1/2 exactly in real arithmetic; absorb rounding in the diagonal
    c2 = 0.5 - s2
    return JointPmf([[c2, s2], [s2, c2]])


# ---------------------------------------------------------------- Markov chains


def conv(p: float, q: float) -> float:
    """``p * q = p (1 - q) + q (1 - p)``: flip probability of two independent flips."""
    return p * (1 - q) + q * (1 - p)


@dataclass(frozen=True)
class MarkovSource:
    """``X_1 = Y_1`` is a fair bit; ``X`` flips with probability ``delta_x`` per step
    and ``Y`` additionally flips with probability ``delta_y`` relative to ``X``'s flip."""

    delta_x: float
    delta_y: float
    d: int

    def __post_init__(self):
        if not (0.0 <= self.delta_x <= 1.0 and 0.0 <= self.delta_y <= 1.0):
            raise ValueError("flip probabilities must lie in [0, 1]")
        if self.d < 1:
            raise ValueError("length must be at least 1")

    @property
    def delta_z(self) -> float:
        """Per-step flip probability of ``Y``."""
        return conv(self.delta_x, self.delta_y)

    @property
    def sigma_x(self) -> float:
        return 2.0 * math.sqrt(self.delta_x * (1.0 - self.delta_x))

    @property
    def sigma_y(self) -> float:
        return 2.0 * math.sqrt(self.delta_z * (1.0 - self.delta_z))

    @property
    def rho_prime(self) -> float:
        """Covariance of the two flip signs ``X_{i-1} X_i`` and ``Y_{i-1} Y_i``."""
        return 4.0 * self.delta_x * (1.0 - self.delta_x) * (1.0 - 2.0 * self.delta_y)

    @property
    def rho_step(self) -> float:
        """Correlation of the normalized flip signs."""
        return self.rho_prime / (self.sigma_x * self.sigma_y)

    def transitions(self) -> np.ndarray:
        """``T[flip_x, flip_y]`` per step."""
        dx, dy = self.delta_x, self.delta_y
        return np.array([[(1 - dx) * (1 - dy), (1 - dx) * dy], [dx * dy, dx * (1 - dy)]])


def markov_joint_pmf(src: MarkovSource) -> np.ndarray:
    """Exact law of ``(X^d, Y^d)`` as a ``2^d x 2^d`` matrix (``x_1`` most significant)."""
    if src.d > MARKOV_JOINT_CAP:
        raise ValueError(f"length {src.d} exceeds the enumeration cap {MARKOV_JOINT_CAP}")
    t = src.transitions()
    # factor[prev_x, new_x, prev_y, new_y]
    bits = np.arange(2)
    fx = bits[:, None] != bits[None, :]
    factor = t[fx[:, :, None, None].astype(int), fx[None, None, :, :].astype(int)]
    p = np.array([[0.5, 0.0], [0.0, 0.5]])
    for _ in range(1, src.d):
        nx, ny = p.shape
        lx, ly = np.arange(nx) & 1, np.arange(ny) & 1
        g = factor[lx[:, None], :, ly[None, :], :]  # (nx, ny, new_x, new_y)
        p = (p[:, :, None, None] * g).transpose(0, 2, 1, 3).reshape(2 * nx, 2 * ny)
    return p


def _signs(d: int) -> np.ndarray:
    """``(2^d, d)`` table of ±1 coordinates."""
    return 2.0 * multi_indices(d, 2) - 1.0


@dataclass(frozen=True, eq=False)
class MarkovBasis:
    """Product bases ``phi_S``, ``phi'_S`` on sequences with diagonal correlation ``rho[S]``.

    ``phi_x[s, x]`` is indexed like subsets elsewhere: coordinate ``i`` is in
    ``S`` when bit ``d - i`` of ``s`` is set.
    """

    source: MarkovSource
    phi_x: np.ndarray
    phi_y: np.ndarray
    rho: np.ndarray
    px: np.ndarray
    py: np.ndarray

    def coefficients_x(self, values) -> np.ndarray:
        return self.phi_x @ (self.px * np.asarray(values, float))

    def coefficients_y(self, values) -> np.ndarray:
        return self.phi_y @ (self.py * np.asarray(values, float))

    def correlation(self, f_coeffs, g_coeffs) -> float:
        """``E[f g] = sum_S f_S g_S rho_S``."""
        return float(np.sum(np.asarray(f_coeffs) * np.asarray(g_coeffs) * self.rho))

    def orthonormality_error(self) -> float:
        ex = np.abs((self.phi_x * self.px) @ self.phi_x.T - np.eye(self.px.size)).max()
        ey = np.abs((self.phi_y * self.py) @ self.phi_y.T - np.eye(self.py.size)).max()
        return float(max(ex, ey))


def _product_table(single: np.ndarray, d: int) -> np.ndarray:
    member = multi_indices(d, 2).astype(bool)
    table = np.ones((1 << d, single.shape[1]))
    for i in range(d):
        table[member[:, i]] *= single[i]
    return table


def markov_basis(src: MarkovSource, tol: float = 1e-10) -> MarkovBasis:
    """Basis from the first coordinate and the centered, scaled flip signs.

    Flip signs at different steps are independent of each other and of the
    first bit, which makes the products orthonormal and the cross
    correlation diagonal.
    """
    d = src.d
    if d > MARKOV_BASIS_CAP:
        raise ValueError(f"length {d} exceeds the basis cap {MARKOV_BASIS_CAP}")
    if d > 1 and (src.sigma_x == 0.0 or src.sigma_y == 0.0):
        raise ZeroVarianceError("a flip probability of 0 or 1 makes the flip sign deterministic")
    x = _signs(d)
    single_x = np.empty((d, 1 << d))
    single_y = np.empty((d, 1 << d))
    single_x[0] = single_y[0] = x[:, 0]
    if d > 1:
        flips = x[:, :-1] * x[:, 1:]
        single_x[1:] = ((flips - (1.0 - 2.0 * src.delta_x)) / src.sigma_x).T
        single_y[1:] = ((flips - (1.0 - 2.0 * src.delta_z)) / src.sigma_y).T
    joint = markov_joint_pmf(src)
    px, py = joint.sum(axis=1), joint.sum(axis=0)
    per_coord = np.full(d, src.rho_step if d > 1 else 1.0)
    per_coord[0] = 1.0
    rho = np.prod(np.where(multi_indices(d, 2).astype(bool), per_coord, 1.0), axis=1)
    basis = MarkovBasis(src, _product_table(single_x, d), _product_table(single_y, d), rho, px, py)
    err = basis.orthonormality_error()
    if err > tol:
        raise ArithmeticError(f"basis is not orthonormal under the chain law (error {err:.2e})")
    return basis


def markov_gram_schmidt_basis(src: MarkovSource) -> tuple[OrthonormalBasis, OrthonormalBasis, np.ndarray]:
    """Orthonormalize the uniform-IID parity functions under each chain's law.

    Returns both bases and their cross-correlation matrix, which is not
    diagonal in general.
    """
    d = src.d
    if d > MARKOV_BASIS_CAP:
        raise ValueError(f"length {d} exceeds the basis cap {MARKOV_BASIS_CAP}")
    joint = markov_joint_pmf(src)
    parity = _product_table(_signs(d).T, d)
    bx = gram_schmidt_basis(joint.sum(axis=1), parity)
    by = gram_schmidt_basis(joint.sum(axis=0), parity)
    return bx, by, bx.psi @ joint @ by.psi.T


def markov_path_problem(src: MarkovSource, qu1: float, qv1: float):
    """The chain law as a bilinear path problem with output means ``2 Q(1) - 1``."""
    from .fpath import PathProblem

    return PathProblem.from_sequence_joint(markov_joint_pmf(src), 2 * qu1 - 1, 2 * qv1 - 1)


__all__ = [
    "CommonRandomnessRegion",
    "MarkovBasis",
    "MarkovSource",
    "ZeroVarianceError",
    "bell_measurement_joint",
    "conv",
    "cr_endpoint_families",
    "cr_region",
    "markov_basis",
    "markov_gram_schmidt_basis",
    "markov_joint_pmf",
    "markov_path_problem",
    "shared_bit_source",
]
