import itertools
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from niss.distributions import JointPmf, binary_joint, dsbs
from niss.fourier import (
    DegenerateBasisError,
    FourierVector,
    TruthTable,
    binary_basis,
    cross_correlation,
    fourier_transform,
    gram_schmidt_basis,
    index_to_subset,
    indicator_decompose,
    inner_product_fourier,
    inverse_transform,
    kron_apply,
    kron_power,
    multi_indices,
    subset_to_index,
)


def direct_expectation(fv, gv, p, d):
    """Sum over every pair of strings, one coordinate at a time."""
    qx, qy = p.shape
    total = 0.0
    for xs in itertools.product(range(qx), repeat=d):
        for ys in itertools.product(range(qy), repeat=d):
            w = np.prod([p[a, b] for a, b in zip(xs, ys)])
            xi = int(np.ravel_multi_index(xs, (qx,) * d))
            yi = int(np.ravel_multi_index(ys, (qy,) * d))
            total += fv[xi] * gv[yi] * w
    return total


def test_ternary_gram_schmidt_values():
    t0 = time.perf_counter()
    b = gram_schmidt_basis([0.4, 0.3, 0.3])
    elapsed = time.perf_counter() - t0
    assert np.allclose(b.psi[1], [1.225, -0.816, -0.816], atol=1e-3)
    assert np.allclose(b.psi[2], [0.0, 1.290, -1.290], atol=1e-3)
    assert elapsed < 1e-3


def test_uniform_binary_basis_is_identity_character():
    b = gram_schmidt_basis([0.5, 0.5])
    assert np.allclose(b.psi[1], [-1.0, 1.0])


@pytest.mark.parametrize("p", [0.1, 0.37, 0.6, 0.9])
def test_biased_binary_basis_is_standardized_coordinate(p):
    b = binary_basis(p)
    mu, sigma = 2 * p - 1, 2 * np.sqrt(p * (1 - p))
    assert np.allclose(b.psi[1], (np.array([-1.0, 1.0]) - mu) / sigma)
    assert b.orthonormality_error() < 1e-10


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_orthonormality_random_marginals(q, seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(q)) * 0.9 + 0.1 / q
    b = gram_schmidt_basis(w)
    assert b.orthonormality_error() < 1e-10
    assert np.all(b.psi[0] == 1.0)


def test_degenerate_marginal_rejected():
    with pytest.raises(DegenerateBasisError):
        gram_schmidt_basis([0.5, 0.5, 0.0])


def test_cross_correlation_structure():
    j = JointPmf(np.random.default_rng(1).dirichlet(np.ones(9)).reshape(3, 3))
    rho = cross_correlation(j, gram_schmidt_basis(j.px), gram_schmidt_basis(j.py)).rho
    assert rho[0, 0] == pytest.approx(1.0)
    assert np.allclose(rho[0, 1:], 0, atol=1e-12) and np.allclose(rho[1:, 0], 0, atol=1e-12)
    assert np.abs(rho).max() <= 1 + 1e-12


def test_boolean_kernel_is_diagonal():
    j = binary_joint(0.6, 0.7, 0.4)
    rho = cross_correlation(j, binary_basis(0.6), binary_basis(0.7))
    assert rho.boolean_value(1e-12) == pytest.approx(0.4, abs=1e-12)


def test_constant_transform():
    b = binary_basis(0.6)
    v = fourier_transform(np.ones(8), b)
    assert v.coeffs[0] == pytest.approx(1.0) and np.allclose(v.coeffs[1:], 0, atol=1e-14)


def test_basis_self_transform():
    b = gram_schmidt_basis([0.4, 0.3, 0.3])
    # psi_2(x_1) as a function on X^2
    table = np.repeat(b.psi[2], 3)
    v = fourier_transform(table, b)
    expect = np.zeros(9)
    expect[2 * 3] = 1.0
    assert np.allclose(v.coeffs, expect, atol=1e-12)


def test_parseval_biased_binary(rng):
    b = binary_basis(0.6)
    f = rng.choice([-1.0, 1.0], size=8)
    assert fourier_transform(f, b).norm2() == pytest.approx(1.0, abs=1e-10)


@given(st.integers(1, 3), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_parseval_and_inverse(d, q, seed):
    r = np.random.default_rng(seed)
    w = r.dirichlet(np.ones(q)) * 0.8 + 0.2 / q
    b = gram_schmidt_basis(w)
    f = r.uniform(-1, 1, q**d)
    v = fourier_transform(f, b)
    pw = kron_power(w[None, :], d).ravel()
    assert v.norm2() == pytest.approx(pw @ (f * f), abs=1e-10)
    assert np.allclose(inverse_transform(v, b).values, f, atol=1e-12)


def test_plancherel_same_variable(rng):
    w = np.array([0.2, 0.5, 0.3])
    b = gram_schmidt_basis(w)
    f, g = rng.normal(size=9), rng.normal(size=9)
    pw = kron_power(w[None, :], 2).ravel()
    fv, gv = fourier_transform(f, b), fourier_transform(g, b)
    assert fv.coeffs @ gv.coeffs == pytest.approx(pw @ (f * g), abs=1e-12)
    identity = JointPmf(np.diag(w))
    rho = cross_correlation(identity, b, b)
    assert inner_product_fourier(fv, gv, rho) == pytest.approx(pw @ (f * g), abs=1e-12)


def test_inner_product_constants():
    b = binary_basis(0.5)
    one = fourier_transform(np.ones(4), b)
    rho = cross_correlation(dsbs(0.4), b, b)
    assert inner_product_fourier(one, one, rho) == pytest.approx(1.0)


def test_inner_product_matches_direct_sum_d2(rng):
    j = dsbs(0.4)
    b = binary_basis(0.5)
    rho = cross_correlation(j, b, b)
    f, g = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    val = inner_product_fourier(fourier_transform(f, b), fourier_transform(g, b), rho)
    assert val == pytest.approx(direct_expectation(f, g, j.p, 2), abs=1e-12)


@pytest.mark.parametrize("q,d", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)])
def test_inner_product_methods_agree_with_enumeration(q, d):
    r = np.random.default_rng(100 * q + d)
    pairs = 100 if q**d <= 9 else 20
    for _ in range(pairs // 10):
        j = JointPmf(r.dirichlet(np.ones(q * q)).reshape(q, q) * 0.9 + 0.1 / (q * q))
        bx, by = gram_schmidt_basis(j.px), gram_schmidt_basis(j.py)
        rho = cross_correlation(j, bx, by)
        truth_p = j.power(d)
        for _ in range(10):
            f, g = r.uniform(-1, 1, q**d), r.uniform(-1, 1, q**d)
            fv, gv = fourier_transform(f, bx), fourier_transform(g, by)
            direct = f @ truth_p @ g
            for method in ("structured", "dense"):
                assert inner_product_fourier(fv, gv, rho, method) == pytest.approx(direct, abs=1e-12)


def test_boolean_path_is_rho_power_of_support():
    j = dsbs(0.4)
    b = binary_basis(0.5)
    rho = cross_correlation(j, b, b)
    r = np.random.default_rng(5)
    f, g = FourierVector(3, 2, r.normal(size=8)), FourierVector(3, 2, r.normal(size=8))
    weights = np.array([0.4 ** len(index_to_subset(s, 3)) for s in range(8)])
    assert inner_product_fourier(f, g, rho, "boolean") == pytest.approx(np.sum(f.coeffs * g.coeffs * weights), abs=1e-14)
    assert inner_product_fourier(f, g, rho, "dense") == pytest.approx(np.sum(f.coeffs * g.coeffs * weights), abs=1e-14)


def test_subset_indexing_roundtrip():
    d = 4
    for s in range(1 << d):
        assert subset_to_index(index_to_subset(s, d), d) == s
    assert subset_to_index((1,), 3) == 4
    mi = multi_indices(3, 2)
    assert tuple(mi[4]) == (1, 0, 0)


def test_kron_apply_matches_dense(rng):
    m = rng.normal(size=(3, 3))
    v = rng.normal(size=27)
    assert np.allclose(kron_apply(m, v, 3), kron_power(m, 3) @ v)


def test_indicator_decompose_examples():
    f = TruthTable(2, 2, [0, 1, 1, 0], out_size=2)
    f0, f1 = indicator_decompose(f)
    assert np.array_equal(f1.values, [-1.0, 1.0, 1.0, -1.0]) and np.array_equal(f0.values, -f1.values)
    const = TruthTable(1, 3, [2, 2, 2], out_size=3)
    fam = indicator_decompose(const)
    assert np.all(fam[2].values == 1) and np.all(fam[0].values == -1) and np.all(fam[1].values == -1)
    assert np.all(sum(t.values for t in fam) == -1)


def test_indicator_family_condition(rng):
    f = TruthTable(2, 3, rng.integers(0, 3, 9), out_size=3)
    fam = indicator_decompose(f)
    vals = np.array([t.values for t in fam])
    assert np.all(np.abs(vals) == 1) and np.all(vals.sum(axis=0) == 2 - 3)
    assert np.all((vals == 1).sum(axis=0) == 1)
