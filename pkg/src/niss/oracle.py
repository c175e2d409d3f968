"""Brute-force ground truth at desk scale.

Everything here works by full enumeration over input sequences and over
function tables, so it shares no code path with the Fourier machinery.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .distributions import JointPmf, TargetPmf

EXPECTATION_CAP = 2**24
PAIR_CAP = 10**8
TIE_TOL = 1e-12


class CapExceededError(ValueError):
    """The requested enumeration is larger than the configured cap."""


def _dense_power(p: np.ndarray, d: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(d):
        out = np.kron(out, p)
    return out


def _values(t) -> np.ndarray:
    return np.asarray(getattr(t, "values", t), dtype=float)


def exact_expectation(f, g, joint: JointPmf, d: int) -> float:
    """``sum_{x, y} f(x) g(y) prod_i P(x_i, y_i)`` by enumeration."""
    qx, qy = joint.shape
    if (qx * qy) ** d > EXPECTATION_CAP:
        raise CapExceededError(f"{(qx * qy) ** d} terms exceed the cap {EXPECTATION_CAP}")
    fv, gv = _values(f), _values(g)
    return _expect(fv, gv, joint.p, d)


def _expect(fv, gv, p, d):
    qx, qy = p.shape
    if d <= 4:
        return float(fv @ _dense_power(p, d) @ gv)
    # condition on the first coordinate to keep memory bounded
    fb = fv.reshape(qx, -1)
    gb = gv.reshape(qy, -1)
    return float(sum(p[a, b] * _expect(fb[a], gb[b], p, d - 1) for a in range(qx) for b in range(qy)))


def output_joint(f_labels, g_labels, nu: int, nv: int, joint: JointPmf, d: int) -> np.ndarray:
    """Exact ``P(f(X^d) = u, g(Y^d) = v)`` for label tables."""
    full = _dense_power(joint.p, d)
    fl = np.asarray(getattr(f_labels, "values", f_labels))
    gl = np.asarray(getattr(g_labels, "values", g_labels))
    a = np.stack([(fl == u).astype(float) for u in range(nu)])
    b = np.stack([(gl == v).astype(float) for v in range(nv)])
    return a @ full @ b.T


def _combination_blocks(n: int, k: int, block: int):
    it = itertools.combinations(range(n), k)
    while True:
        chunk = list(itertools.islice(it, block))
        if not chunk:
            return
        arr = np.zeros((len(chunk), n))
        if k:
            rows = np.repeat(np.arange(len(chunk)), k)
            arr[rows, np.asarray(chunk).ravel()] = 1.0
        yield arr


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    f_accept: tuple[int, ...]
    g_accept: tuple[int, ...]

    def tables(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        f = -np.ones(n)
        g = -np.ones(n)
        f[list(self.f_accept)] = 1.0
        g[list(self.g_accept)] = 1.0
        return f, g


def brute_force_biased_maxcorr(joint: JointPmf, d: int, n_u: int, n_v: int) -> BruteForceResult:
    """Best ``E[f g]`` over ±1 tables accepting exactly ``n_u`` and ``n_v`` inputs.

    Ties within 1e-12 go to the lexicographically smallest pair of
    acceptance sets.
    """
    nx, ny = joint.qx**d, joint.qy**d
    if not (0 <= n_u <= nx and 0 <= n_v <= ny):
        raise ValueError("acceptance counts out of range")
    total = comb(nx, n_u) * comb(ny, n_v)
    if total > PAIR_CAP:
        raise CapExceededError(f"{total} table pairs exceed the cap {PAIR_CAP}")
    if comb(ny, n_v) > 4_000_000:
        raise CapExceededError("too many partner tables to hold in memory")
    full = _dense_power(joint.p, d)
    px, py = full.sum(axis=1), full.sum(axis=0)
    g_sets = np.vstack(list(_combination_blocks(ny, n_v, 1 << 20)))
    # h[j, x] = P(X = x, Y in B_j)
    h = g_sets @ full.T
    pb = g_sets @ py
    block = max(1, 2_000_000 // max(1, g_sets.shape[0]))
    best, best_pos, chunk_maxes = -np.inf, None, []
    for f_sets in _combination_blocks(nx, n_u, block):
        vals = 4.0 * (f_sets @ h.T) - 2.0 * (f_sets @ px)[:, None] - 2.0 * pb[None, :] + 1.0
        chunk_maxes.append(vals.max())
        best = max(best, chunk_maxes[-1])
    # second pass only over the first chunk that reaches the optimum
    target = best - TIE_TOL
    first_chunk = next(i for i, m in enumerate(chunk_maxes) if m >= target)
    for i, f_sets in enumerate(_combination_blocks(nx, n_u, block)):
        if i != first_chunk:
            continue
        vals = 4.0 * (f_sets @ h.T) - 2.0 * (f_sets @ px)[:, None] - 2.0 * pb[None, :] + 1.0
        flat = np.flatnonzero(vals.ravel() >= target)[0]
        r, c = divmod(flat, vals.shape[1])
        best_pos = (tuple(np.flatnonzero(f_sets[r])), tuple(np.flatnonzero(g_sets[c])))
        break
    return BruteForceResult(float(best), tuple(int(i) for i in best_pos[0]), tuple(int(i) for i in best_pos[1]))


@dataclass(frozen=True)
class ExtremePoint:
    """Largest directional magnitude found along one direction bucket."""

    alpha: np.ndarray
    t: float
    target: TargetPmf
    f_labels: np.ndarray
    g_labels: np.ndarray


def _label_tables(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)


def brute_force_extremes(joint: JointPmf, d: int, out_sizes, direction_grid=None, marginals=None, table_cap: int = 200_000):
    """Enumerate label-table pairs and keep the largest ``t`` per direction.

    ``out_sizes`` is ``(|U|, |V|)``.  ``marginals``, if given, is a pair of
    output pmfs that the realized marginals must match (within 1e-9).
    ``direction_grid`` is a list of unit directions over ``U_phi x V_phi``;
    without it every distinct direction is its own bucket.
    """
    nu, nv = out_sizes
    nx, ny = joint.qx**d, joint.qy**d
    if nu**nx > table_cap or nv**ny > table_cap or nu**nx * nv**ny > PAIR_CAP:
        raise CapExceededError("finite-output table enumeration exceeds the cap")
    full = _dense_power(joint.p, d)
    ft, gt = _label_tables(nx, nu), _label_tables(ny, nv)
    fa = np.stack([(ft == u).astype(float) for u in range(nu)], axis=1)  # (mf, nu, nx)
    ga = np.stack([(gt == v).astype(float) for v in range(nv)], axis=1)
    px, py = full.sum(axis=1), full.sum(axis=0)
    fmarg = fa @ px
    gmarg = ga @ py
    if marginals is not None:
        keep_f = np.all(np.abs(fmarg - np.asarray(marginals[0])) <= 1e-9, axis=1)
        keep_g = np.all(np.abs(gmarg - np.asarray(marginals[1])) <= 1e-9, axis=1)
        ft, fa, fmarg = ft[keep_f], fa[keep_f], fmarg[keep_f]
        gt, ga, gmarg = gt[keep_g], ga[keep_g], gmarg[keep_g]
    grid = None if direction_grid is None else np.array([np.ravel(a) for a in direction_grid], dtype=float)
    buckets: dict = {}
    gfull = np.einsum("jvy,xy->jvx", ga, full)
    for i in range(ft.shape[0]):
        qs = np.einsum("ux,jvx->juv", fa[i], gfull)
        beta = 4.0 * (qs - fmarg[i][None, :, None] * gmarg[:, None, :])[:, 1:, 1:]
        beta = beta.reshape(beta.shape[0], -1)
        t = np.linalg.norm(beta, axis=1)
        for j in np.flatnonzero(t > 1e-12):
            alpha = beta[j] / t[j]
            key = int(np.argmax(grid @ alpha)) if grid is not None else tuple(np.round(alpha, 9))
            if key not in buckets or t[j] > buckets[key][0] + TIE_TOL:
                buckets[key] = (t[j], alpha, qs[j], ft[i], gt[j])
    out = []
    for key in sorted(buckets, key=str):
        t, alpha, q, f, g = buckets[key]
        q = np.clip(q, 0.0, None)
        out.append(ExtremePoint(alpha.reshape(nu - 1, nv - 1), float(t), TargetPmf(q / q.sum()), f, g))
    return out
