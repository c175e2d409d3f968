"""Linear-programming dual of biased maximal correlation for uniform inputs.

Two formulations live here.  :func:`build_dual_lp` assembles the program in
the plain multiplier form.  It is unbounded: shifting the constant
coefficients of both multipliers of one side by the same amount leaves every
constraint intact and raises the objective.  It is kept for inspection.

:func:`dual_biased_maxcorr` solves a dual that is correct.  For a fixed
``g`` the best ``f`` is a linear program whose dual is

    mu g_0 + min 2 Q_U(0) lp_0 + 2 Q_U(1) lm_0
    s.t. lp_s - lm_s = (P g)_s  for s != 0,  lp(x) >= 0,  lm(x) >= 0,

with ``lp``, ``lm`` the Fourier coefficients of the multipliers of
``f <= 1`` and ``f >= -1``.  That value is convex in ``g``, so the maximum
over the partner polytope is attained at a vertex; vertices are enumerated
and each inner program is solved by the dense simplex below.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg

from .distributions import JointPmf
from .fourier import cross_correlation, gram_schmidt_basis, kron_power

LP_TOL = 1e-9
SIZE_CAP = 256
VERTEX_CAP = 20_000


class SingularKernelError(ValueError):
    """The correlation kernel is not invertible."""


class InfeasibleLpError(ValueError):
    pass


class UnboundedLpError(ValueError):
    pass


# ---------------------------------------------------------------- generic LP


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``max`` (or ``min``) ``c . x`` subject to ``A x (<=|>=|=) b`` and variable bounds.

    ``bounds`` holds one ``(lo, hi)`` per variable; ``None`` or an infinite
    value means unbounded on that side.  The default is ``x >= 0``.
    """

    objective: np.ndarray
    matrix: np.ndarray
    senses: tuple[str, ...]
    rhs: np.ndarray
    bounds: tuple = None
    maximize: bool = True
    names: tuple[str, ...] = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.asarray(self.matrix, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.rhs, dtype=float)
        if a.shape[0] != b.size or len(self.senses) != b.size:
            raise ValueError("row counts of matrix, senses and rhs differ")
        if not (np.isfinite(c).all() and np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("LP data must be finite")
        if any(s not in ("<=", ">=", "=") for s in self.senses):
            raise ValueError("senses must be '<=', '>=' or '='")
        bounds = self.bounds if self.bounds is not None else ((0.0, None),) * c.size
        if len(bounds) != c.size:
            raise ValueError("one bound pair per variable")
        norm = []
        for lo, hi in bounds:
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            if lo > hi:
                raise ValueError("empty variable range")
            norm.append((lo, hi))
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "bounds", tuple(norm))

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size


@dataclass(frozen=True, eq=False)
class LpSolution:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int


def _standard_form(lp: LpProblem):
    """Rewrite as ``max c z, A z = b, z >= 0, b >= 0``; return the map back to ``x``."""
    n = lp.n_vars
    cols, shift = [], np.zeros(n)
    extra_rows = []
    # each original variable becomes a combination of nonnegative columns
    recover = []
    for j, (lo, hi) in enumerate(lp.bounds):
        if np.isfinite(lo):
            shift[j] = lo
            recover.append([(len(cols), 1.0)])
            cols.append(j)
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            recover.append([(len(cols), -1.0)])
            cols.append(j)
        else:
            recover.append([(len(cols), 1.0), (len(cols) + 1, -1.0)])
            cols.extend([j, j])
    m0 = len(cols)
    sign_of_col = np.zeros(m0)
    for j, parts in enumerate(recover):
        for k, s in parts:
            sign_of_col[k] = s
    a0 = lp.matrix[:, cols] * sign_of_col
    c0 = lp.objective[cols] * sign_of_col
    b0 = lp.rhs - lp.matrix @ shift
    if not lp.maximize:
        c0 = -c0
    senses = list(lp.senses)
    rows = [a0[i] for i in range(a0.shape[0])]
    rhs = list(b0)
    for k, ub in extra_rows:
        r = np.zeros(m0)
        r[k] = 1.0
        rows.append(r)
        rhs.append(ub)
        senses.append("<=")
    n_slack = sum(s != "=" for s in senses)
    a = np.zeros((len(rows), m0 + n_slack))
    b = np.array(rhs, dtype=float)
    row_sign = np.ones(len(rows))
    k = m0
    for i, (r, s) in enumerate(zip(rows, senses)):
        a[i, :m0] = r
        if s == "<=":
            a[i, k] = 1.0
            k += 1
        elif s == ">=":
            a[i, k] = -1.0
            k += 1
        if b[i] < 0:
            a[i] *= -1.0
            b[i] *= -1.0
            row_sign[i] = -1.0
    c = np.zeros(a.shape[1])
    c[:m0] = c0
    return a, b, c, recover, shift, row_sign


def _pivot(t: np.ndarray, basis: list, r: int, col: int) -> None:
    t[r] /= t[r, col]
    others = np.flatnonzero(np.abs(t[:, col]) > 0)
    for i in others:
        if i != r:
            t[i] -= t[i, col] * t[r]
    basis[r] = col


def _run_simplex(t: np.ndarray, basis: list, allowed: int, max_iter: int) -> int:
    """Bland's rule on tableau ``t`` (last row = reduced costs, last column = rhs)."""
    it = 0
    while True:
        costs = t[-1, :allowed]
        enter = np.flatnonzero(costs > LP_TOL)
        if enter.size == 0:
            return it
        col = int(enter[0])
        column = t[:-1, col]
        pos = np.flatnonzero(column > LP_TOL)
        if pos.size == 0:
            raise UnboundedLpError("objective is unbounded")
        ratios = t[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + LP_TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(t, basis, r, col)
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def simplex_solve(lp: LpProblem, max_iter: int = 50_000) -> LpSolution:
    """Two-phase dense tableau simplex with Bland's anti-cycling rule.

    ``duals`` are the row multipliers of the original constraints, signed
    so that the optimum equals ``duals . rhs`` plus the bound terms.
    """
    a, b, c, recover, shift, row_sign = _standard_form(lp)
    m, n = a.shape
    # phase one: one artificial per row
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n] = a.sum(axis=0)
    t[-1, -1] = b.sum()
    basis = list(range(n, n + m))
    it = _run_simplex(t, basis, n + m, max_iter)
    if t[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleLpError("constraints are infeasible")
    # drive artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(t[r, :n]) > LP_TOL)
            if nz.size:
                _pivot(t, basis, r, int(nz[0]))
                keep.append(r)
        else:
            keep.append(r)
    rows = keep
    t2 = np.zeros((len(rows) + 1, n + 1))
    t2[:-1, :n] = t[rows, :n]
    t2[:-1, -1] = t[rows, -1]
    basis2 = [basis[r] for r in rows]
    t2[-1, :n] = c
    for i, bj in enumerate(basis2):
        t2[-1] -= c[bj] * t2[i]
    it += _run_simplex(t2, basis2, n, max_iter)
    z = np.zeros(n)
    for i, bj in enumerate(basis2):
        z[bj] = t2[i, -1]
    x = shift.copy()
    for j, parts in enumerate(recover):
        x[j] += sum(s * z[k] for k, s in parts)
    value = float(lp.objective @ x)
    # duals from the final basis of the standard form: B^T y = c_B
    bmat = a[rows][:, basis2]
    y_rows = np.zeros(m)
    if basis2:
        y = np.linalg.lstsq(bmat.T, c[basis2], rcond=None)[0]
        y_rows[rows] = y
    y_rows *= row_sign
    if not lp.maximize:
        y_rows = -y_rows
    return LpSolution(x, value, y_rows[: lp.n_rows], it)


def dump_lp(lp: LpProblem) -> str:
    """Plain-text tableau: one line per row, then the bounds."""
    names = lp.names or tuple(f"x{j}" for j in range(lp.n_vars))
    width = max(10, max(len(s) for s in names) + 1)
    lines = [("max" if lp.maximize else "min") + " " + " ".join(f"{v:>{width}.6g}" for v in lp.objective)]
    lines.append("    " + " ".join(f"{s:>{width}}" for s in names))
    for row, s, r in zip(lp.matrix, lp.senses, lp.rhs):
        lines.append("    " + " ".join(f"{v:>{width}.6g}" for v in row) + f" {s:>2} {r:.12g}")
    for name, (lo, hi) in zip(names, lp.bounds):
        lines.append(f"bound {name} [{lo:g}, {hi:g}]")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- instance


@dataclass(frozen=True, eq=False)
class DualInstance:
    """Uniform-input instance with the tensorized kernel and tabulated characters."""

    joint: JointPmf
    d: int
    qu1: float
    qv1: float

    def __post_init__(self):
        if not self.joint.is_uniform():
            raise ValueError("the dual form needs uniform input marginals")
        if self.joint.qx != self.joint.qy:
            raise ValueError("the dual form needs equal input alphabets")
        q = self.joint.qx
        if q**self.d > SIZE_CAP:
            raise ValueError(f"q^d = {q**self.d} exceeds the LP size cap {SIZE_CAP}")
        if not (0.0 <= self.qu1 <= 1.0 and 0.0 <= self.qv1 <= 1.0):
            raise ValueError("output probabilities must lie in [0, 1]")
        basis = gram_schmidt_basis(np.full(q, 1.0 / q))
        rho = cross_correlation(self.joint, basis, basis).rho
        kernel = kron_power(rho, self.d)
        if np.abs(kernel - kernel.T).max() > 1e-12:
            raise ValueError("the correlation kernel is not symmetric")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "chi", kron_power(basis.psi, self.d))

    @property
    def q(self) -> int:
        return self.joint.qx

    @property
    def size(self) -> int:
        return self.q**self.d

    @property
    def mu(self) -> float:
        return 2.0 * self.qu1 - 1.0

    @property
    def nu(self) -> float:
        return 2.0 * self.qv1 - 1.0


def _factor_kernel(kernel: np.ndarray):
    lu, piv = scipy.linalg.lu_factor(kernel, check_finite=True)
    if np.abs(np.diag(lu)).min() < 1e-12 * max(1.0, np.abs(kernel).max()):
        raise SingularKernelError("correlation kernel is singular")
    return lu, piv


def build_dual_lp(inst: DualInstance) -> LpProblem:
    """The plain multiplier program (unbounded as posed).

    Variables, in order: the coefficients of the multipliers of ``f <= 1``,
    ``f >= -1``, ``g <= 1`` and ``g >= -1``, all free.  ``f_bar`` is
    ``P^{-1}(lp_f - lm_f)`` and is boxed around the offset ``2 Q_V(1) - 1``;
    ``g_bar`` likewise around ``2 Q_U(1) - 1``.
    """
    n = inst.size
    lu = _factor_kernel(inst.kernel)
    pinv = scipy.linalg.lu_solve(lu, np.eye(n))
    chi = inst.chi  # chi[s, x]
    nz = chi[1:].T @ pinv[1:]  # (x, s): sum over nonconstant s of chi_s(x) P^{-1}[s, :]
    zeros = np.zeros((n, n))
    rows, senses, rhs = [], [], []

    def add(block, sense, bound):
        rows.append(block)
        senses.extend([sense] * block.shape[0])
        rhs.extend([bound] * block.shape[0])

    # box constraints, f side uses the V offset and g side the U offset
    for side, offset in ((0, inst.nu), (1, inst.mu)):
        blocks = [zeros] * 4
        blocks[2 * side], blocks[2 * side + 1] = nz, -nz
        mat = np.hstack(blocks)
        add(mat, "<=", 1.0 - offset)
        add(mat, ">=", -1.0 - offset)
    # nonnegativity of each multiplier in the time domain
    for k in range(4):
        blocks = [zeros] * 4
        blocks[k] = chi.T
        add(np.hstack(blocks), ">=", 0.0)
    c = np.zeros(4 * n)
    c[0], c[n], c[2 * n], c[3 * n] = 1.0 - inst.qu1, inst.qu1, 1.0 - inst.qv1, inst.qv1
    names = tuple(f"{tag}{s}" for tag in ("lpf", "lmf", "lpg", "lmg") for s in range(n))
    return LpProblem(c, np.vstack(rows), tuple(senses), np.array(rhs), ((None, None),) * (4 * n), True, names)


def dual_constant(inst: DualInstance) -> float:
    return inst.mu * inst.nu


# ---------------------------------------------------------------- corrected dual


def inner_dual_lp(inst: DualInstance, h: np.ndarray) -> LpProblem:
    """Dual of ``max_f E[f g]`` over the ``f`` polytope, given ``h = P g``.

    Variables: coefficients of the two multipliers (free), nonnegative in
    the time domain, matching ``h`` off the constant coefficient.
    """
    n = inst.size
    chi = inst.chi
    eq = np.hstack([np.eye(n), -np.eye(n)])[1:]
    nonneg = np.vstack([np.hstack([chi.T, np.zeros((n, n))]), np.hstack([np.zeros((n, n)), chi.T])])
    c = np.zeros(2 * n)
    c[0], c[n] = 2.0 * (1.0 - inst.qu1), 2.0 * inst.qu1
    senses = ("=",) * (n - 1) + (">=",) * (2 * n)
    rhs = np.concatenate([h[1:], np.zeros(2 * n)])
    names = tuple(f"{tag}{s}" for tag in ("lp", "lm") for s in range(n))
    return LpProblem(c, np.vstack([eq, nonneg]), senses, rhs, ((None, None),) * (2 * n), False, names)


def partner_vertices(n: int, bias: float):
    """Vertices of ``{g in [-1, 1]^n : mean(g) = bias}``: ±1 tables plus at most one fractional entry."""
    mass = (bias + 1.0) / 2.0 * n
    k = int(np.floor(mass + 1e-12))
    frac = mass - k
    if frac < 1e-12:
        frac = 0.0
    count = comb(n, k) * (1 if frac == 0.0 else n - k)
    if count > VERTEX_CAP:
        raise ValueError(f"{count} partner vertices exceed the cap {VERTEX_CAP}")
    for ones in itertools.combinations(range(n), k):
        base = -np.ones(n)
        base[list(ones)] = 1.0
        if frac == 0.0:
            yield base
            continue
        for j in range(n):
            if base[j] < 0:
                v = base.copy()
                v[j] = -1.0 + 2.0 * frac
                yield v


@dataclass(frozen=True, eq=False)
class DualResult:
    value: float
    f_values: np.ndarray
    g_values: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    lps_solved: int

    @property
    def box_violation(self) -> float:
        return max(0.0, float(np.abs(self.f_values).max()) - 1.0, float(np.abs(self.g_values).max()) - 1.0)


def dual_biased_maxcorr(inst: DualInstance) -> DualResult:
    """Biased maximal correlation at block length ``d`` by the corrected dual.

    The inner programs are solved with :func:`simplex_solve`; the best
    ``f`` is read off the multipliers of the matching constraints.
    """
    n = inst.size
    chi = inst.chi
    best = None
    count = 0
    for g in partner_vertices(n, inst.nu):
        g_coeffs = chi @ g / n
        h = inst.kernel @ g_coeffs
        lp = inner_dual_lp(inst, h)
        sol = simplex_solve(lp)
        count += 1
        value = inst.mu * g_coeffs[0] + sol.objective
        if best is None or value > best[0] + 1e-12:
            best = (value, g, sol)
    value, g, sol = best
    f_coeffs = np.concatenate([[inst.mu], sol.duals[: n - 1]])
    f_values = chi.T @ f_coeffs
    return DualResult(float(value), f_values, g, sol.x[:n], sol.x[n:], count)


@dataclass(frozen=True)
class DualPrimalReport:
    dual_value: float
    primal_value: float
    gap: float
    certified: bool
    box_violation: float


def dual_vs_primal_check(inst: DualInstance, cfg=None) -> DualPrimalReport:
    """Solve by the dual and by path following; report the difference."""
    from .fpath import FPathConfig, fpath_solve
    from .maxcorr import PrimalInstance

    if inst.q != 2 or inst.d > 3:
        raise ValueError("the cross-check is limited to binary inputs and d <= 3")
    dual = dual_biased_maxcorr(inst)
    state = fpath_solve(PrimalInstance(inst.joint, inst.d, inst.qu1, inst.qv1), cfg or FPathConfig())
    return DualPrimalReport(dual.value, state.objective, dual.value - state.objective, state.certificate is not None, dual.box_violation)
