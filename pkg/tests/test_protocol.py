import numpy as np
import pytest
from hypothesis import given, strategies as st

from niss.distributions import JointPmf, TargetPmf, binary_joint, binary_target, dsbs, star_mix, tv_distance
from niss.fpath import FPathConfig, fpath_solve
from niss.maxcorr import PrimalInstance
from niss.oracle import brute_force_extremes, output_joint
from niss.protocol import (
    CoinProtocol,
    ConditionViolationError,
    EmpiricalJoint,
    InfeasibleTargetError,
    PseudoCoins,
    RandomizedFunction,
    VonNeumannCoins,
    coin_protocol_fb,
    coin_protocol_ff,
    coin_protocol_uniform_output,
    derandomize_binary,
    derandomize_finite,
    exact_tv,
    monte_carlo_eval,
    rd_moments,
    star_target,
    tv_band,
)


def family_tables(n_out, n_x):
    """Random valid families: columns are ``2 P(u|x) - 1`` for a random conditional law."""
    return st.integers(0, 2**32 - 1).map(
        lambda s: 2.0 * np.random.default_rng(s).dirichlet(np.ones(n_out), size=n_x).T - 1.0
    )


def test_family_validation():
    with pytest.raises(ConditionViolationError):
        RandomizedFunction.binary(1, 2, [1.5, 0.0])
    with pytest.raises(ConditionViolationError):
        RandomizedFunction(1, 2, np.array([[0.0, 0.0], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        RandomizedFunction(2, 2, np.zeros((2, 3)))


@given(family_tables(2, 4))
def test_binary_conditional_law(t):
    fam = RandomizedFunction(2, 2, t)
    assert fam.conditional_law()[1] == pytest.approx((1 + t[1]) / 2, abs=1e-12)


@given(family_tables(4, 3))
def test_finite_conditional_law_recovers_table(t):
    fam = RandomizedFunction(1, 3, t)
    law = fam.conditional_law()
    assert law.sum(axis=0) == pytest.approx(np.ones(3), abs=1e-12)
    assert 2 * law - 1 == pytest.approx(t, abs=1e-12)


@given(family_tables(2, 4), family_tables(2, 4))
def test_rd_preserved_binary(tf, tg):
    j = binary_joint(0.6, 0.7, 0.4)
    m = rd_moments(RandomizedFunction(2, 2, tf), RandomizedFunction(2, 2, tg), j)
    assert m["mean_f_out"] == pytest.approx(m["mean_f"], abs=1e-12)
    assert m["mean_g_out"] == pytest.approx(m["mean_g"], abs=1e-12)
    assert m["cross_out"] == pytest.approx(m["cross"], abs=1e-12)


@given(family_tables(3, 3), family_tables(4, 3))
def test_rd_preserved_finite(tf, tg):
    j = JointPmf(np.array([[2, 1, 1], [1, 3, 0], [0, 1, 3]]) / 12)
    m = rd_moments(RandomizedFunction(1, 3, tf), RandomizedFunction(1, 3, tg), j)
    assert m["cross_out"] == pytest.approx(m["cross"], abs=1e-12)


def test_constant_family_ignores_input():
    fam = RandomizedFunction.constant(2, 2, [0.2, 0.3, 0.5])
    assert fam.conditional_law() == pytest.approx(np.repeat([[0.2], [0.3], [0.5]], 4, axis=1))


def test_derandomized_sampler_frequencies():
    fam = RandomizedFunction.binary(1, 2, [-0.5, 0.8])
    s = derandomize_binary(fam, np.random.SeedSequence(3))
    x = np.repeat([0, 1], 200_000)
    out = s(x)
    assert set(np.unique(out)) <= {-1, 1}
    assert np.mean(out[:200_000] == 1) == pytest.approx(0.25, abs=3 * np.sqrt(0.25 * 0.75 / 2e5))
    assert np.mean(out[200_000:] == 1) == pytest.approx(0.9, abs=3 * np.sqrt(0.09 / 2e5))
    lab = derandomize_finite(RandomizedFunction.constant(1, 2, [0.2, 0.3, 0.5]), 9)(np.zeros(300_000, dtype=int))
    freq = np.bincount(lab, minlength=3) / lab.size
    assert freq == pytest.approx([0.2, 0.3, 0.5], abs=3 * np.sqrt(0.25 / 3e5))
    with pytest.raises(ValueError):
        derandomize_binary(RandomizedFunction.constant(1, 2, [0.2, 0.3, 0.5]), 1)


def test_von_neumann_coins():
    vn = VonNeumannCoins(np.random.SeedSequence(5), 0.8)
    bits = vn.fair_bits(200_000)
    assert set(np.unique(bits)) <= {0, 1}
    assert bits.mean() == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 2e5))
    c = vn.bernoulli(np.full(200_000, 0.3))
    assert c.mean() == pytest.approx(0.3, abs=3 * np.sqrt(0.21 / 2e5))


def test_uniform_output_example():
    j = dsbs(0.4)
    p = coin_protocol_uniform_output(j, 0.2)
    assert p.mixing_weight == pytest.approx(0.5)
    assert p.exact_output(j).p == pytest.approx(np.array([[0.3, 0.2], [0.2, 0.3]]), abs=1e-12)
    emp = monte_carlo_eval(p, j, 200_000, rng_seed=11)
    assert emp.within(TargetPmf([[0.3, 0.2], [0.2, 0.3]]))


def test_uniform_output_negative_and_infeasible():
    j = dsbs(0.4)
    assert coin_protocol_uniform_output(j, -0.1).exact_output(j).p[0, 1] == pytest.approx(0.275)
    assert coin_protocol_uniform_output(j, 0.0).gate == 0.0
    with pytest.raises(InfeasibleTargetError):
        coin_protocol_uniform_output(j, 0.5)


def test_uniform_output_biased_binary_input():
    j = binary_joint(0.6, 0.7, 0.4)
    p = coin_protocol_uniform_output(j, 0.1)
    out = p.exact_output(j)
    assert out.qu == pytest.approx([0.5, 0.5]) and out.qv == pytest.approx([0.5, 0.5])
    assert out.p[0, 0] + out.p[1, 1] - out.p[0, 1] - out.p[1, 0] == pytest.approx(0.1, abs=1e-12)


def test_fb_with_solver_state():
    j = dsbs(0.4)
    state = fpath_solve(PrimalInstance(j, 2, 0.25, 0.25), FPathConfig())
    target = binary_target(0.25, 0.25, 0.1)
    p = coin_protocol_fb(j, 0.25, 0.25, target, state)
    assert exact_tv(p, j, target) < 1e-12
    emp = monte_carlo_eval(p, j, 200_000, rng_seed=2)
    assert emp.within(target)


def test_fb_agreement_and_errors():
    j = dsbs(0.4)
    f = np.array([1.0, -1.0, -1.0, -1.0])
    p = coin_protocol_fb(j, 0.25, 0.25, 0.7, (f, f))
    out = p.exact_output(j)
    assert out.p[0, 0] + out.p[1, 1] == pytest.approx(0.7)
    with pytest.raises(InfeasibleTargetError):
        coin_protocol_fb(j, 0.25, 0.25, 0.95, (f, f))
    with pytest.raises(InfeasibleTargetError):
        coin_protocol_fb(j, 0.5, 0.25, 0.7, (f, f))


def test_fb_product_target_has_closed_gate():
    j = dsbs(0.4)
    f = np.array([1.0, -1.0, -1.0, -1.0])
    p = coin_protocol_fb(j, 0.25, 0.25, binary_target(0.25, 0.25, 0.0625), (f, f))
    assert p.gate == 0.0


def test_ff_ternary_target():
    j = dsbs(0.6)
    ext = max(brute_force_extremes(j, 1, (3, 2)), key=lambda e: e.t)
    target = star_mix(ext.target, 0.4)
    p = coin_protocol_ff(j, target, ext)
    assert p.mixing_weight == pytest.approx(0.4)
    assert exact_tv(p, j, target) < 1e-12
    emp = monte_carlo_eval(p, j, 200_000, rng_seed=8)
    assert emp.within(target)


def test_ff_rejects_wrong_direction_and_excess():
    j = dsbs(0.6)
    ext = max(brute_force_extremes(j, 1, (2, 2)), key=lambda e: e.t)
    flipped = TargetPmf(ext.target.p[:, ::-1])
    with pytest.raises(InfeasibleTargetError):
        coin_protocol_ff(j, flipped, ext)
    stretched = TargetPmf([[0.5, 0.0], [0.0, 0.5]])
    with pytest.raises(InfeasibleTargetError):
        coin_protocol_ff(j, stretched, ext)


@given(st.floats(0, 1))
def test_star_convexity(lam2):
    j = dsbs(0.6)
    ext = max(brute_force_extremes(j, 1, (3, 2)), key=lambda e: e.t)
    mixed = star_mix(ext.target, lam2)
    p = coin_protocol_ff(j, mixed, ext)
    assert tv_distance(p.exact_output(j), mixed) < 1e-12
    assert tv_distance(star_target(p, j), mixed) < 1e-12


def test_gate_mixture_identity():
    j = binary_joint(0.6, 0.7, 0.4)
    fx = RandomizedFunction.binary(1, 2, [-0.3, 0.5])
    gy = RandomizedFunction.binary(1, 2, [0.2, -0.6])
    p = CoinProtocol(1, 0.8, fx, gy, np.array([0.3, 0.7]), np.array([0.6, 0.4]))
    inner = p.inner_output(j).p
    lx, ly = fx.conditional_law() @ j.px, gy.conditional_law() @ j.py
    g = 0.8
    expect = g * g * inner + g * (1 - g) * (np.outer(lx, [0.6, 0.4]) + np.outer([0.3, 0.7], ly)) + (1 - g) ** 2 * np.outer([0.3, 0.7], [0.6, 0.4])
    assert p.exact_output(j).p == pytest.approx(expect, abs=1e-14)


def test_seeded_runs_are_identical():
    j = dsbs(0.4)
    p = coin_protocol_uniform_output(j, 0.2)
    a = monte_carlo_eval(p, j, 100_000, rng_seed=7)
    b = monte_carlo_eval(p, j, 100_000, rng_seed=7)
    c = monte_carlo_eval(p, j, 100_000, rng_seed=8)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_von_neumann_mode_samples_target():
    j = dsbs(0.4)
    p = coin_protocol_uniform_output(j, 0.2)
    emp = monte_carlo_eval(p, j, 100_000, rng_seed=3, coins="von_neumann")
    assert emp.within(p.exact_output(j))


def test_table_pairs_sample_their_exact_law():
    j = binary_joint(0.6, 0.7, 0.4)
    f = np.array([0, 1, 2, 1])
    g = np.array([1, 0, 0, 1])

    from niss.fourier import TruthTable

    emp = monte_carlo_eval((TruthTable(2, 2, f, out_size=3), TruthTable(2, 2, g, out_size=2)), j, 200_000, rng_seed=4)
    assert emp.within(TargetPmf(output_joint(f, g, 3, 2, j, 2)))


def test_empirical_helpers():
    emp = EmpiricalJoint(np.array([[30, 20], [20, 30]]), 100)
    t = TargetPmf([[0.3, 0.2], [0.2, 0.3]])
    assert emp.tv_to(t) == 0.0 and emp.within(t)
    rows = list(emp.rows(t))
    assert rows[0][:3] == (0, 0, 30)
    assert tv_band(t, 100) == pytest.approx(3 * (2 * np.sqrt(0.21) + 2 * np.sqrt(0.16)) / 10)
    with pytest.raises(ValueError):
        EmpiricalJoint(np.array([[1, 1]]), 3)


def test_pseudo_coins_shape():
    c = PseudoCoins(np.random.SeedSequence(0)).bernoulli(np.zeros((3, 2)))
    assert c.shape == (3, 2) and not c.any()
