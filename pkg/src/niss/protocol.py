"""Simulating protocols: derandomization coins, gated mixtures, Monte-Carlo evaluation.

A protocol is evaluated either exactly (conditional output laws pushed
through the input joint) or by sampling.  Sampling draws the source pairs
and the two agents' private coins from separate streams split off one
seed, so runs are reproducible bit for bit.

The private coins stand in for randomness extracted from input samples
that the simulating functions do not read.  With ``coins="von_neumann"``
they are produced that way: fair bits by von Neumann's pairing trick on
fresh draws from the agent's own input marginal, and a coin of bias ``p``
by comparing those bits with the binary expansion of ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import JointPmf, TargetPmf, binary_target, star_mix, tv_distance
from .maxcorr import centered_cross, direction_of_target, maximal_correlation_single_letter

COND_TOL = 1e-12
CHUNK = 1 << 16


class ConditionViolationError(ValueError):
    """A randomized family leaves ``[-1, 1]`` or does not sum to ``2 - |U|``."""


class InfeasibleTargetError(ValueError):
    """The target lies outside what the protocol can reach."""


# ---------------------------------------------------------------- families


@dataclass(frozen=True, eq=False)
class RandomizedFunction:
    """Family ``f~_u(x)`` over labels ``u = 0..|U|-1`` with values in ``[-1, 1]``.

    ``table[u, x]``; every column sums to ``2 - |U|``.  A binary function
    with values ``v`` is the family ``(-v, v)``.
    """

    d: int
    q: int
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] < 2 or t.shape[1] != self.q**self.d:
            raise ValueError(f"family must have shape (|U|, {self.q**self.d})")
        if np.abs(t).max() > 1.0 + COND_TOL:
            raise ConditionViolationError("family values leave [-1, 1]")
        if np.abs(t.sum(axis=0) - (2 - t.shape[0])).max() > 1e-9:
            raise ConditionViolationError("family does not sum to 2 - |U| pointwise")
        t = np.clip(t, -1.0, 1.0)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "_biases", _sequential_biases(t))

    @classmethod
    def binary(cls, d: int, q: int, values) -> "RandomizedFunction":
        v = np.asarray(getattr(values, "values", values), dtype=float)
        return cls(d, q, np.vstack([-v, v]))

    @classmethod
    def from_labels(cls, d: int, q: int, labels, n_out: int) -> "RandomizedFunction":
        lab = np.asarray(getattr(labels, "values", labels))
        return cls(d, q, np.stack([np.where(lab == u, 1.0, -1.0) for u in range(n_out)]))

    @classmethod
    def constant(cls, d: int, q: int, pmf) -> "RandomizedFunction":
        pmf = np.asarray(pmf, dtype=float)
        return cls(d, q, np.repeat((2.0 * pmf - 1.0)[:, None], q**d, axis=1))

    @property
    def n_out(self) -> int:
        return self.table.shape[0]

    def conditional_law(self) -> np.ndarray:
        """Exact ``P(label = u | x)`` of the sequential-coin output, shape ``(|U|, N)``."""
        b = self._biases
        law = np.zeros_like(self.table)
        reach = np.ones(self.table.shape[1])
        for u in range(1, self.n_out):
            law[u] = reach * b[u]
            reach = reach * (1.0 - b[u])
        law[0] = reach
        return law


def _sequential_biases(t: np.ndarray) -> np.ndarray:
    """Coin biases ``(f~_u + 1) / (3 - u - sum_{u' < u} f~_u')`` for ``u >= 1``."""
    b = np.zeros_like(t)
    cum = np.zeros(t.shape[1])
    for u in range(1, t.shape[0]):
        denom = 3.0 - u - cum
        num = t[u] + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(denom > COND_TOL, num / denom, 0.0)
        if p.min() < -COND_TOL or p.max() > 1.0 + COND_TOL:
            raise ConditionViolationError(f"coin bias for label {u} outside [0, 1]")
        b[u] = np.clip(p, 0.0, 1.0)
        cum += t[u]
    return b


# ---------------------------------------------------------------- coins


class PseudoCoins:
    """Independent coins from a seeded generator."""

    def __init__(self, seed_seq: np.random.SeedSequence):
        self.rng = np.random.default_rng(seed_seq)

    def bernoulli(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self.rng.random(p.shape) < p


class VonNeumannCoins:
    """Coins built from extra samples of a binary-valued input statistic.

    Fair bits come from pairs of source bits that disagree; a coin of bias
    ``p`` compares 53 fair bits, read as a binary fraction, with ``p``.
    """

    def __init__(self, seed_seq: np.random.SeedSequence, source_p1: float):
        if not 0.0 < source_p1 < 1.0:
            raise ValueError("extraction needs a nondegenerate source bit")
        self.rng = np.random.default_rng(seed_seq)
        self.p1 = float(source_p1)
        self.samples_used = 0

    def fair_bits(self, n: int) -> np.ndarray:
        out = np.empty(0, dtype=np.uint8)
        while out.size < n:
            need = n - out.size
            m = int(need / (2 * self.p1 * (1 - self.p1)) * 1.2) + 16
            pairs = (self.rng.random((m, 2)) < self.p1).astype(np.uint8)
            self.samples_used += 2 * m
            keep = pairs[:, 0] != pairs[:, 1]
            out = np.concatenate([out, pairs[keep, 0]])
        return out[:n]

    def bernoulli(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        bits = self.fair_bits(p.size * 53).reshape(p.size, 53).astype(np.float64)
        frac = bits @ (0.5 ** np.arange(1, 54))
        return (frac < p.ravel()).reshape(p.shape)


def _coin_source(kind: str, seed_seq, input_marginal) -> PseudoCoins | VonNeumannCoins:
    if kind == "pseudo":
        return PseudoCoins(seed_seq)
    if kind == "von_neumann":
        return VonNeumannCoins(seed_seq, float(input_marginal[0]))
    raise ValueError(f"unknown coin mode {kind!r}")


def sample_family(fam: RandomizedFunction, x_idx: np.ndarray, coins) -> np.ndarray:
    """Labels from the sequential coins: the first label whose coin lands 1, else 0."""
    b = fam._biases[:, x_idx]
    labels = np.zeros(x_idx.size, dtype=np.int64)
    open_ = np.ones(x_idx.size, dtype=bool)
    for u in range(1, fam.n_out):
        hit = coins.bernoulli(b[u])
        labels[open_ & hit] = u
        open_ &= ~hit
    return labels


class Sampler:
    """Stochastic map from input indices to outputs for one agent."""

    def __init__(self, fam: RandomizedFunction, coins, pm1: bool = False):
        self.fam = fam
        self.coins = coins
        self.pm1 = pm1

    def __call__(self, x_idx) -> np.ndarray:
        labels = sample_family(self.fam, np.asarray(x_idx, dtype=np.int64), self.coins)
        return np.where(labels == 1, 1.0, -1.0) if self.pm1 else labels


def derandomize_binary(ft: RandomizedFunction, rng) -> Sampler:
    """±1 outputs with ``P(+1 | x) = (1 + f~(x)) / 2``; ``rng`` is a seed sequence or coin source."""
    if ft.n_out != 2:
        raise ValueError("binary derandomization needs a two-label family")
    return Sampler(ft, _as_coins(rng), pm1=True)


def derandomize_finite(family: RandomizedFunction, rng) -> Sampler:
    return Sampler(family, _as_coins(rng))


def _as_coins(rng):
    if hasattr(rng, "bernoulli"):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return PseudoCoins(rng)
    return PseudoCoins(np.random.SeedSequence(rng))


def rd_moments(fam_x: RandomizedFunction, fam_y: RandomizedFunction, joint: JointPmf) -> dict:
    """Means and cross expectations of the randomized families and of their derandomized outputs.

    Computed from the exact conditional laws; no sampling.
    """
    d = fam_x.d
    full = joint.power(d)
    px, py = full.sum(axis=1), full.sum(axis=0)
    out_x = 2.0 * fam_x.conditional_law() - 1.0
    out_y = 2.0 * fam_y.conditional_law() - 1.0
    return {
        "mean_f": fam_x.table @ px,
        "mean_f_out": out_x @ px,
        "mean_g": fam_y.table @ py,
        "mean_g_out": out_y @ py,
        "cross": fam_x.table @ full @ fam_y.table.T,
        "cross_out": out_x @ full @ out_y.T,
    }


# ---------------------------------------------------------------- protocols


@dataclass(frozen=True, eq=False)
class CoinProtocol:
    """Gated two-stage protocol.

    Each agent independently flips a gate coin that lands 1 with
    probability ``gate``.  On 1 it derandomizes its inner family on the
    input; otherwise it draws from its fallback pmf with private coins.
    The inner families must read input samples disjoint from those that
    feed the coins.
    """

    d: int
    gate: float
    inner_x: RandomizedFunction
    inner_y: RandomizedFunction
    fallback_u: np.ndarray
    fallback_v: np.ndarray
    kind: str = "gated"

    def __post_init__(self):
        if not 0.0 <= self.gate <= 1.0:
            raise ValueError("gate probability must lie in [0, 1]")
        for name, n in (("fallback_u", self.inner_x.n_out), ("fallback_v", self.inner_y.n_out)):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.size != n or arr.min() < 0 or abs(arr.sum() - 1) > 1e-12:
                raise ValueError(f"{name} is not a pmf over the output labels")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def mixing_weight(self) -> float:
        """Probability that both agents pass their gates."""
        return self.gate**2

    def agent_laws(self) -> tuple[np.ndarray, np.ndarray]:
        lx = self.gate * self.inner_x.conditional_law() + (1.0 - self.gate) * self.fallback_u[:, None]
        ly = self.gate * self.inner_y.conditional_law() + (1.0 - self.gate) * self.fallback_v[:, None]
        return lx, ly

    def exact_output(self, joint: JointPmf) -> TargetPmf:
        lx, ly = self.agent_laws()
        out = lx @ joint.power(self.d) @ ly.T
        return TargetPmf(out / out.sum())

    def inner_output(self, joint: JointPmf) -> TargetPmf:
        out = self.inner_x.conditional_law() @ joint.power(self.d) @ self.inner_y.conditional_law().T
        return TargetPmf(out / out.sum())

    def sample(self, x_idx, y_idx, coins_x, coins_y) -> tuple[np.ndarray, np.ndarray]:
        fb_x = RandomizedFunction.constant(0, 1, self.fallback_u)
        fb_y = RandomizedFunction.constant(0, 1, self.fallback_v)
        gx = coins_x.bernoulli(np.full(x_idx.size, self.gate))
        gy = coins_y.bernoulli(np.full(y_idx.size, self.gate))
        u_in = sample_family(self.inner_x, x_idx, coins_x)
        v_in = sample_family(self.inner_y, y_idx, coins_y)
        u_fb = sample_family(fb_x, np.zeros(x_idx.size, dtype=np.int64), coins_x)
        v_fb = sample_family(fb_y, np.zeros(y_idx.size, dtype=np.int64), coins_y)
        return np.where(gx, u_in, u_fb), np.where(gy, v_in, v_fb)


def _single_letter_values(joint: JointPmf):
    res = maximal_correlation_single_letter(joint)
    fx = res.basis_x.psi[1:].T @ res.f_coeffs
    gy = res.basis_y.psi[1:].T @ res.g_coeffs
    return fx, gy, res.achieved, res.rho_star


def coin_protocol_uniform_output(joint: JointPmf, target_rho: float) -> CoinProtocol:
    """Uniform binary outputs with ``E[UV] = target_rho`` from one input sample.

    The inner functions are the best single-letter pair bounded by 1 (for
    binary inputs ``(x - E X) / (1 + |E X|)``), and ``gate^2`` is the ratio
    of the target to their correlation.  For uniform binary inputs that
    correlation is the input correlation itself.
    """
    fx, gy, achieved, rho_star = _single_letter_values(joint)
    if abs(target_rho) > abs(achieved) + 1e-12:
        raise InfeasibleTargetError(
            f"|target| {abs(target_rho):.6g} exceeds the single-letter correlation {abs(achieved):.6g}"
            f" (maximal correlation {rho_star:.6g})"
        )
    if target_rho * achieved < 0:
        gy = -gy
    lam2 = 0.0 if target_rho == 0 else min(1.0, abs(target_rho) / abs(achieved))
    fair = np.array([0.5, 0.5])
    return CoinProtocol(
        1, float(np.sqrt(lam2)), RandomizedFunction.binary(1, joint.qx, fx), RandomizedFunction.binary(1, joint.qy, gy), fair, fair, "uniform"
    )


def _solver_tables(solver_output):
    if hasattr(solver_output, "values_f"):
        return np.asarray(solver_output.values_f), np.asarray(solver_output.values_g)
    f, g = solver_output
    return np.asarray(getattr(f, "values", f), float), np.asarray(getattr(g, "values", g), float)


def _as_binary_target(target, q_u: float, q_v: float) -> TargetPmf:
    if isinstance(target, TargetPmf):
        if abs(target.qu[1] - q_u) > 1e-9 or abs(target.qv[1] - q_v) > 1e-9:
            raise InfeasibleTargetError("target marginals differ from the requested output marginals")
        return target
    agree = float(target)
    p11 = (agree - 1.0 + q_u + q_v) / 2.0
    try:
        return binary_target(q_u, q_v, p11)
    except ValueError as exc:
        raise InfeasibleTargetError(f"agreement {agree} is impossible with these marginals") from exc


def coin_protocol_fb(joint: JointPmf, q_u: float, q_v: float, target, solver_output) -> CoinProtocol:
    """Binary outputs with prescribed marginals.

    ``target`` is a binary :class:`TargetPmf` or the agreement probability
    ``P(U = V)``.  ``solver_output`` supplies ``[-1, 1]`` tables with means
    ``2 Q(1) - 1`` (an F-PATH state or a pair of tables).  ``gate^2`` is the
    ratio of the target's covariance to the one the tables reach.
    """
    fv, gv = _solver_tables(solver_output)
    q = joint.qx
    d = int(round(np.log(fv.size) / np.log(q)))
    full = joint.power(d)
    bu, bv = 2.0 * q_u - 1.0, 2.0 * q_v - 1.0
    if abs(full.sum(axis=1) @ fv - bu) > 1e-8 or abs(full.sum(axis=0) @ gv - bv) > 1e-8:
        raise InfeasibleTargetError("solver tables do not carry the requested output marginals")
    tq = _as_binary_target(target, q_u, q_v)
    e_target = float(tq.p[0, 0] + tq.p[1, 1] - tq.p[0, 1] - tq.p[1, 0])
    achieved = float(fv @ full @ gv)
    cov_t, cov_a = e_target - bu * bv, achieved - bu * bv
    if abs(cov_t) <= 1e-15:
        lam2 = 0.0
    elif cov_t * cov_a <= 0 or abs(cov_t) > abs(cov_a) + 1e-12:
        raise InfeasibleTargetError(
            f"target E[UV] = {e_target:.6g} is outside [{bu * bv:.6g}, {achieved:.6g}] reachable with these tables"
        )
    else:
        lam2 = min(1.0, cov_t / cov_a)
    return CoinProtocol(
        d,
        float(np.sqrt(lam2)),
        RandomizedFunction.binary(d, q, fv),
        RandomizedFunction.binary(d, joint.qy, gv),
        np.array([1.0 - q_u, q_u]),
        np.array([1.0 - q_v, q_v]),
        "fb",
    )


def coin_protocol_ff(joint: JointPmf, target: TargetPmf, solver_output) -> CoinProtocol:
    """Finite outputs: gate between an extreme sampler and the independent one.

    ``solver_output`` gives label tables (or randomized families) whose
    output law lies in the target's direction with at least its magnitude,
    and with the target's marginals.
    """
    if hasattr(solver_output, "f_labels"):
        fl, gl = solver_output.f_labels, solver_output.g_labels
    else:
        fl, gl = solver_output
    nu, nv = target.nu, target.nv
    qx, qy = joint.qx, joint.qy
    if isinstance(fl, RandomizedFunction):
        fam_x, fam_y, d = fl, gl, fl.d
    else:
        fl, gl = np.asarray(fl), np.asarray(gl)
        d = int(round(np.log(fl.size) / np.log(qx)))
        fam_x = RandomizedFunction.from_labels(d, qx, fl, nu)
        fam_y = RandomizedFunction.from_labels(d, qy, gl, nv)
    extreme = CoinProtocol(d, 1.0, fam_x, fam_y, np.full(nu, 1.0 / nu), np.full(nv, 1.0 / nv)).inner_output(joint)
    if np.abs(extreme.qu - target.qu).max() > 1e-9 or np.abs(extreme.qv - target.qv).max() > 1e-9:
        raise InfeasibleTargetError("extreme sampler marginals differ from the target marginals")
    beta_t = centered_cross(target)
    t_target = float(np.linalg.norm(beta_t))
    if t_target <= 1e-14:
        lam2 = 0.0
    else:
        alpha_e, t_ext = direction_of_target(extreme)
        alpha_t = beta_t / t_target
        if np.abs(alpha_e.alpha - alpha_t).max() > 1e-6:
            raise InfeasibleTargetError("target direction differs from the extreme sampler's direction")
        if t_target > t_ext + 1e-12:
            raise InfeasibleTargetError(f"target magnitude {t_target:.6g} exceeds the extreme {t_ext:.6g}")
        lam2 = min(1.0, t_target / t_ext)
    return CoinProtocol(d, float(np.sqrt(lam2)), fam_x, fam_y, extreme.qu.copy(), extreme.qv.copy(), "ff")


def star_target(protocol: CoinProtocol, joint: JointPmf) -> TargetPmf:
    """The law a gated protocol should realize: inner law mixed toward its product."""
    return star_mix(protocol.inner_output(joint), protocol.mixing_weight)


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True, eq=False)
class EmpiricalJoint:
    counts: np.ndarray
    n_samples: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.sum() != self.n_samples:
            raise ValueError("counts do not sum to the sample size")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def pmf(self) -> np.ndarray:
        return self.counts / self.n_samples

    def half_widths(self, target: TargetPmf, k: float = 3.0) -> np.ndarray:
        """``k`` binomial standard deviations per cell under the target."""
        p = target.p
        return k * np.sqrt(p * (1.0 - p) / self.n_samples)

    def within(self, target: TargetPmf, k: float = 3.0) -> bool:
        diff = np.abs(self.pmf - target.p)
        return bool(np.all(diff <= self.half_widths(target, k) + 1e-15))

    def tv_to(self, target: TargetPmf) -> float:
        return float(np.abs(self.pmf - target.p).sum())

    def rows(self, target: TargetPmf | None = None):
        """CSV rows ``(u, v, count, phat, target, |diff|)``."""
        ph = self.pmf
        tp = target.p if target is not None else np.full(ph.shape, np.nan)
        for u in range(ph.shape[0]):
            for v in range(ph.shape[1]):
                yield u, v, int(self.counts[u, v]), ph[u, v], tp[u, v], abs(ph[u, v] - tp[u, v])


def _draw_inputs(rng: np.random.Generator, joint: JointPmf, d: int, n: int):
    qx, qy = joint.shape
    cells = rng.choice(qx * qy, size=(n, d), p=joint.p.ravel())
    xs, ys = np.divmod(cells, qy)
    wx = qx ** np.arange(d - 1, -1, -1)
    wy = qy ** np.arange(d - 1, -1, -1)
    return xs @ wx, ys @ wy


def monte_carlo_eval(protocol, joint: JointPmf, n_samples: int, rng_seed: int, coins: str = "pseudo") -> EmpiricalJoint:
    """Sample ``n_samples`` output pairs.

    ``protocol`` is a :class:`CoinProtocol` or a pair of tables: ±1 tables
    (mapped to labels ``+1 -> 1``, ``-1 -> 0``), label tables, or
    :class:`RandomizedFunction` families.  Seeds are split into streams for
    the source and for each agent's coins.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if not isinstance(protocol, CoinProtocol):
        protocol = _tables_protocol(protocol, joint)
    src, sx, sy = np.random.SeedSequence(int(rng_seed)).spawn(3)
    source = np.random.default_rng(src)
    cx = _coin_source(coins, sx, joint.px)
    cy = _coin_source(coins, sy, joint.py)
    counts = np.zeros((protocol.inner_x.n_out, protocol.inner_y.n_out), dtype=np.int64)
    done = 0
    while done < n_samples:
        m = min(CHUNK, n_samples - done)
        x_idx, y_idx = _draw_inputs(source, joint, protocol.d, m)
        u, v = protocol.sample(x_idx, y_idx, cx, cy)
        np.add.at(counts, (u, v), 1)
        done += m
    return EmpiricalJoint(counts, n_samples)


def _tables_protocol(pair, joint: JointPmf) -> CoinProtocol:
    f, g = pair
    fams = []
    for t, q in ((f, joint.qx), (g, joint.qy)):
        if isinstance(t, RandomizedFunction):
            fams.append(t)
            continue
        vals = np.asarray(getattr(t, "values", t))
        d = int(round(np.log(vals.size) / np.log(q)))
        n_out = getattr(t, "out_size", None)
        if n_out is None:
            fams.append(RandomizedFunction.binary(d, q, vals.astype(float)))
        else:
            fams.append(RandomizedFunction.from_labels(d, q, vals, n_out))
    fx, fy = fams
    return CoinProtocol(fx.d, 1.0, fx, fy, np.full(fx.n_out, 1.0 / fx.n_out), np.full(fy.n_out, 1.0 / fy.n_out), "tables")


def tv_band(target: TargetPmf, n_samples: int, k: float = 3.0) -> float:
    """Sum over cells of ``k`` binomial standard deviations; a loose bound for the TV of a faithful sampler."""
    p = target.p
    return float(k * np.sqrt(p * (1.0 - p) / n_samples).sum())


def exact_tv(protocol: CoinProtocol, joint: JointPmf, target: TargetPmf) -> float:
    return tv_distance(protocol.exact_output(joint), target)


__all__ = [
    "CoinProtocol",
    "ConditionViolationError",
    "EmpiricalJoint",
    "InfeasibleTargetError",
    "PseudoCoins",
    "RandomizedFunction",
    "Sampler",
    "VonNeumannCoins",
    "coin_protocol_fb",
    "coin_protocol_ff",
    "coin_protocol_uniform_output",
    "derandomize_binary",
    "derandomize_finite",
    "exact_tv",
    "monte_carlo_eval",
    "rd_moments",
    "sample_family",
    "star_target",
    "tv_band",
]
