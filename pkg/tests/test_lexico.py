import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from niss.distributions import binary_joint, dsbs
from niss.fourier import TruthTable, binary_basis, cross_correlation, fourier_transform, inner_product_fourier
from niss.lexico import (
    DistanceSpectrum,
    LexPair,
    UnsupportedHypothesisError,
    acceptance_count,
    distance_spectrum,
    hamming_matrix,
    lex_output_joint,
    lex_pair,
    project,
    shuffle,
    spectrum_dominates,
    time_domain_correlation,
    tv_decay_experiment,
)
from niss.oracle import brute_force_biased_maxcorr, exact_expectation


def tables(d):
    return st.lists(st.sampled_from([-1.0, 1.0]), min_size=1 << d, max_size=1 << d).map(np.array)


def test_acceptance_count_rounding():
    assert acceptance_count(3, 0.25) == 2
    assert acceptance_count(3, 0.26) == 3
    assert acceptance_count(3, 0.25 + 1e-15) == 2
    assert acceptance_count(4, 1.0) == 16
    with pytest.raises(ValueError):
        acceptance_count(3, 1.5)


def test_lex_pair_thresholds():
    p = lex_pair(3, 0.25, 0.625)
    assert (p.n_u, p.n_v) == (2, 5)
    assert p.x_threshold == "0010" and p.y_threshold == "0101"
    assert list(p.f.values) == [1, 1, -1, -1, -1, -1, -1, -1]


def test_hamming_matrix_against_popcount():
    for d in range(1, 7):
        idx = np.arange(1 << d)
        ref = np.array([[bin(a ^ b).count("1") for b in idx] for a in idx])
        assert np.array_equal(hamming_matrix(d), ref)
    with pytest.raises(ValueError):
        hamming_matrix(13)


def test_distance_spectrum_small():
    f = np.array([1.0, 1.0, -1.0, -1.0])
    g = np.array([1.0, -1.0, 1.0, -1.0])
    # accepted: f {00, 01}, g {00, 10}; distances 0, 1, 1, 2
    assert distance_spectrum(f, g).n == (1, 2, 1)


@given(tables(4), tables(4))
def test_spectrum_total_is_product_of_sizes(f, g):
    s = distance_spectrum(f, g)
    assert s.total == int((f > 0).sum() * (g > 0).sum())


@given(tables(3), tables(3), st.floats(-0.95, 0.95))
def test_three_correlation_routes_agree(f, g, rho):
    j = dsbs(rho)
    d = 3
    qu, qv = float((f > 0).mean()), float((g > 0).mean())
    brute = exact_expectation(f, g, j, d)
    td = time_domain_correlation(f, g, rho, qu, qv)
    b = binary_basis(0.5)
    fo = inner_product_fourier(
        fourier_transform(TruthTable(d, 2, f), b), fourier_transform(TruthTable(d, 2, g), b), cross_correlation(j, b, b)
    )
    assert td == pytest.approx(brute, abs=1e-12)
    assert fo == pytest.approx(brute, abs=1e-12)


def test_time_domain_accepts_joint_and_rejects_biased_inputs():
    f = np.array([1.0, -1.0, -1.0, -1.0])
    assert time_domain_correlation(f, f, dsbs(0.4), 0.25, 0.25) == pytest.approx(0.49)
    with pytest.raises(UnsupportedHypothesisError):
        time_domain_correlation(f, f, binary_joint(0.6, 0.7, 0.4), 0.25, 0.25)
    with pytest.raises(ValueError):
        time_domain_correlation(f, f, 0.4, 0.5, 0.25)


def test_anticorrelated_limit():
    f = np.array([1.0, -1.0])
    assert time_domain_correlation(f, -f, -1.0, 0.5, 0.5) == pytest.approx(1.0)


@given(tables(3), st.integers(1, 3))
def test_project_keeps_acceptance_count(f, k):
    out = project(TruthTable(3, 2, f), k)
    assert (out.values > 0).sum() == (f > 0).sum()


@given(tables(3), tables(3), st.integers(1, 3))
def test_joint_projection_dominates(f, g, k):
    before = distance_spectrum(f, g)
    after = distance_spectrum(project(TruthTable(3, 2, f), k), project(TruthTable(3, 2, g), k))
    assert spectrum_dominates(after, before)
    assert before <= after


@given(tables(3), st.permutations([1, 2, 3]))
def test_shuffle_matches_coordinate_permutation(f, pi):
    out = shuffle(TruthTable(3, 2, f), pi)
    for x in itertools.product((0, 1), repeat=3):
        px = tuple(x[p - 1] for p in pi)
        xi = int("".join(map(str, x)), 2)
        pxi = int("".join(map(str, px)), 2)
        assert out.values[xi] == f[pxi]


@given(tables(3), tables(3), st.permutations([1, 2, 3]))
def test_common_shuffle_keeps_spectrum(f, g, pi):
    a, b = shuffle(TruthTable(3, 2, f), pi), shuffle(TruthTable(3, 2, g), pi)
    assert distance_spectrum(a, b) == distance_spectrum(f, g)


def test_shuffle_rejects_non_permutation():
    with pytest.raises(ValueError):
        shuffle(TruthTable(2, 2, np.ones(4)), [1, 1])


def test_dominance_is_a_partial_order():
    a, b = DistanceSpectrum((1, 2, 1)), DistanceSpectrum((0, 3, 1))
    assert spectrum_dominates(a, b) and not spectrum_dominates(b, a)
    assert spectrum_dominates(a, a)
    with pytest.raises(ValueError):
        DistanceSpectrum((1, -1))


@pytest.mark.parametrize("d", [1, 2])
def test_lex_pair_optimal_for_every_count_small_d(d):
    j = dsbs(0.4)
    for nu in range((1 << d) + 1):
        for nv in range((1 << d) + 1):
            p = LexPair(d, nu, nv)
            v = exact_expectation(p.f, p.g, j, d)
            assert v == pytest.approx(brute_force_biased_maxcorr(j, d, nu, nv).value, abs=1e-12)


def test_lex_pair_d3_equal_counts_optimal_unequal_not_always():
    j = dsbs(0.4)
    for n in range(9):
        p = LexPair(3, n, n)
        assert exact_expectation(p.f, p.g, j, 3) == pytest.approx(brute_force_biased_maxcorr(j, 3, n, n).value, abs=1e-12)
    p = LexPair(3, 1, 4)
    assert exact_expectation(p.f, p.g, j, 3) == pytest.approx(0.1)
    assert brute_force_biased_maxcorr(j, 3, 1, 4).value == pytest.approx(0.142)


def test_lex_output_joint_matches_enumeration():
    from niss.oracle import output_joint

    p = lex_pair(4, 0.3, 0.6)
    out = lex_output_joint(4, 0.3, 0.6, 0.4)
    ref = output_joint((p.f.values > 0).astype(int), (p.g.values > 0).astype(int), 2, 2, dsbs(0.4), 4)
    assert out.p == pytest.approx(ref, abs=1e-14)


def test_decay_rows():
    rows = tv_decay_experiment(1 / 3, 1 / 3, 0.4, range(1, 9))
    assert [r.d for r in rows] == list(range(1, 8))
    assert np.isnan(rows[0].ratio)
    assert all(r.tv >= 0 for r in rows)
    with pytest.raises(ValueError):
        tv_decay_experiment(0.3, 0.3, 0.4, [15])
