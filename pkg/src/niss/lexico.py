"""Lexicographic threshold functions, distance spectra and correlation-preserving operators.

Everything here assumes uniform binary inputs.  Strings are indexed as in
:mod:`niss.fourier`: ``x_1`` is the most significant position and the
symbol ``-1`` has digit 0, so index order is lexicographic order with
``-1 < +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import JointPmf, TargetPmf, tv_distance
from .fourier import TruthTable, kron_apply

HAMMING_CAP = 12
LEX_CAP = 20


class UnsupportedHypothesisError(ValueError):
    """The closed form needs uniform binary input marginals."""


def _pm1(f) -> np.ndarray:
    v = np.asarray(getattr(f, "values", f), dtype=float)
    if not np.all(np.abs(v) == 1.0):
        raise ValueError("expected a ±1 table")
    return v


def _dim(n: int) -> int:
    d = n.bit_length() - 1
    if n != 1 << d:
        raise ValueError("table length is not a power of two")
    return d


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.uint32)
    count = np.zeros(a.shape, dtype=np.int64)
    while np.any(a):
        count += (a & 1).astype(np.int64)
        a = a >> 1
    return count


def acceptance_count(d: int, q1: float) -> int:
    """``ceil(2^d * q1)``, guarded against rounding just above an integer."""
    if not 0.0 <= q1 <= 1.0:
        raise ValueError("output probability must lie in [0, 1]")
    x = (1 << d) * q1
    return min(1 << d, max(0, math.ceil(x - 1e-9 * max(1.0, x))))


# ---------------------------------------------------------------- lex pairs


@dataclass(frozen=True)
class LexPair:
    d: int
    n_u: int
    n_v: int

    @property
    def x_threshold(self) -> str:
        """Binary representation of the acceptance count for ``f``."""
        return format(self.n_u, f"0{self.d + 1}b")

    @property
    def y_threshold(self) -> str:
        return format(self.n_v, f"0{self.d + 1}b")

    @property
    def f(self) -> TruthTable:
        return TruthTable(self.d, 2, np.where(np.arange(1 << self.d) < self.n_u, 1.0, -1.0))

    @property
    def g(self) -> TruthTable:
        return TruthTable(self.d, 2, np.where(np.arange(1 << self.d) < self.n_v, 1.0, -1.0))


def lex_pair(d: int, q_u_bias: float, q_v_bias: float) -> LexPair:
    """Accept the ``ceil(2^d Q(1))`` lexicographically smallest strings on each side."""
    if d < 1 or d > LEX_CAP:
        raise ValueError(f"block length must be in 1..{LEX_CAP}")
    return LexPair(d, acceptance_count(d, q_u_bias), acceptance_count(d, q_v_bias))


# ---------------------------------------------------------------- correlation


def _rho_of(rho) -> float:
    if isinstance(rho, JointPmf):
        if rho.shape != (2, 2) or not rho.is_uniform():
            raise UnsupportedHypothesisError("time-domain formula needs uniform binary marginals")
        return float(rho.p[1, 1] + rho.p[0, 0] - rho.p[0, 1] - rho.p[1, 0])
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    return rho


def joint_accept_mass(f_accept: np.ndarray, g_accept: np.ndarray, rho: float, d: int) -> float:
    """``P(X in A, Y in B)`` under the doubly symmetric source, from indicator vectors."""
    if rho == -1.0:
        kernel = np.array([[0.0, 0.5], [0.5, 0.0]])
        return float(f_accept @ kron_apply(kernel, g_accept, d))
    # ((1+rho)/4)^d * sum beta^dH with beta = (1-rho)/(1+rho)
    beta = (1.0 - rho) / (1.0 + rho)
    kernel = np.array([[1.0, beta], [beta, 1.0]])
    return float(((1.0 + rho) / 4.0) ** d * (f_accept @ kron_apply(kernel, g_accept, d)))


def time_domain_correlation(f, g, rho, q_u_bias: float, q_v_bias: float) -> float:
    """``E[f g]`` from Hamming-distance weights over the accepted pairs.

    ``q_u_bias`` and ``q_v_bias`` are the acceptance probabilities of ``f``
    and ``g``; they must match the tables.
    """
    fv, gv = _pm1(f), _pm1(g)
    d = _dim(fv.size)
    if gv.size != fv.size:
        raise ValueError("tables differ in length")
    r = _rho_of(rho)
    a, b = (fv > 0).astype(float), (gv > 0).astype(float)
    if abs(a.mean() - q_u_bias) > 1e-12 or abs(b.mean() - q_v_bias) > 1e-12:
        raise ValueError("acceptance probabilities do not match the tables")
    return 4.0 * joint_accept_mass(a, b, r, d) - 2.0 * q_u_bias - 2.0 * q_v_bias + 1.0


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True)
class DistanceSpectrum:
    """Accepted-pair counts by Hamming distance, ``n[k]`` for ``k = 0..d``."""

    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        if any(x < 0 for x in self.n):
            raise ValueError("spectrum entries must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.n)

    def __le__(self, other: "DistanceSpectrum") -> bool:
        """``self`` is dominated by ``other``."""
        return spectrum_dominates(other, self)


def distance_spectrum(f, g) -> DistanceSpectrum:
    fv, gv = _pm1(f), _pm1(g)
    d = _dim(fv.size)
    if gv.size != fv.size:
        raise ValueError("tables differ in length")
    a, b = np.flatnonzero(fv > 0), np.flatnonzero(gv > 0)
    counts = np.zeros(d + 1, dtype=np.int64)
    for chunk in np.array_split(a, max(1, a.size * b.size // 4_000_000 + 1)):
        if chunk.size and b.size:
            counts += np.bincount(_popcount(np.bitwise_xor.outer(chunk, b)).ravel(), minlength=d + 1)
    return DistanceSpectrum(tuple(counts))


def spectrum_dominates(s1: DistanceSpectrum, s2: DistanceSpectrum) -> bool:
    """True when every prefix sum of ``s1`` is at least that of ``s2``."""
    if len(s1.n) != len(s2.n):
        raise ValueError("spectra have different lengths")
    return bool(np.all(np.cumsum(s1.n) >= np.cumsum(s2.n)))


# ---------------------------------------------------------------- operators


def project(f: TruthTable, k: int) -> TruthTable:
    """Push accepted mass toward ``x_k = -1``.

    Where ``x_k = -1`` the new table accepts if either of ``x`` and its
    ``k``-flip was accepted; where ``x_k = +1`` it needs both.
    """
    fv = _pm1(f)
    d = _dim(fv.size)
    if not 1 <= k <= d:
        raise ValueError(f"coordinate {k} outside 1..{d}")
    t = (fv > 0).reshape((2,) * d)
    lo = np.take(t, 0, axis=k - 1)
    hi = np.take(t, 1, axis=k - 1)
    out = np.stack([lo | hi, lo & hi], axis=k - 1)
    return TruthTable(d, 2, np.where(out.ravel(), 1.0, -1.0))


def shuffle(f: TruthTable, pi) -> TruthTable:
    """``f(pi(x))`` where ``pi(x)_i = x_{pi(i)}``; ``pi`` lists 1-based coordinates."""
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    d = _dim(fv.size)
    perm = [int(p) - 1 for p in pi]
    if sorted(perm) != list(range(d)):
        raise ValueError(f"{list(pi)} is not a permutation of 1..{d}")
    inverse = np.argsort(perm)
    return TruthTable(d, 2, np.transpose(fv.reshape((2,) * d), inverse).ravel())


def hamming_matrix(d: int) -> np.ndarray:
    """Pairwise Hamming distances on ``{-1, 1}^d`` built by block recursion."""
    if not 1 <= d <= HAMMING_CAP:
        raise ValueError(f"block length must be in 1..{HAMMING_CAP}")
    base = np.array([[0, 1], [1, 0]], dtype=np.int16)
    out = base
    for k in range(1, d):
        ones = np.ones((1 << k, 1 << k), dtype=np.int16)
        out = np.kron(np.ones((2, 2), dtype=np.int16), out) + np.kron(base, ones)
    return out


# ---------------------------------------------------------------- decay


def lex_output_joint(d: int, q_u_bias: float, q_v_bias: float, rho: float) -> TargetPmf:
    """Exact 2x2 output pmf of the lex pair, rows ``U = -1, +1``."""
    pair = lex_pair(d, q_u_bias, q_v_bias)
    a = (np.arange(1 << d) < pair.n_u).astype(float)
    b = (np.arange(1 << d) < pair.n_v).astype(float)
    p11 = joint_accept_mass(a, b, rho, d)
    pu, pv = pair.n_u / (1 << d), pair.n_v / (1 << d)
    out = np.clip(np.array([[1.0 - pu - pv + p11, pv - p11], [pu - p11, p11]]), 0.0, None)
    return TargetPmf(out / out.sum())


@dataclass(frozen=True)
class DecayRow:
    d: int
    tv: float
    ratio: float


def tv_decay_experiment(q_u_bias: float, q_v_bias: float, rho: float, d_range) -> list[DecayRow]:
    """Distance of each lex-pair output law to the one at the largest ``d``.

    The largest block length stands in for the limit, so its own row has
    distance 0 and is omitted.  ``ratio`` is ``tv(d) / tv(d-1)`` (NaN for
    the first row or when the previous distance is 0).
    """
    ds = sorted(set(int(d) for d in d_range))
    if not ds or ds[-1] > 14:
        raise ValueError("block lengths must be in 1..14")
    proxy = lex_output_joint(ds[-1], q_u_bias, q_v_bias, rho)
    rows, prev = [], None
    for d in ds[:-1]:
        tv = tv_distance(lex_output_joint(d, q_u_bias, q_v_bias, rho), proxy)
        ratio = tv / prev if prev else float("nan")
        rows.append(DecayRow(d, tv, ratio))
        prev = tv
    return rows

