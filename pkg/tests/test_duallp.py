import numpy as np
import pytest
from scipy.optimize import linprog

from niss.distributions import JointPmf, binary_joint, dsbs
from niss.duallp import (
    DualInstance,
    InfeasibleLpError,
    LpProblem,
    UnboundedLpError,
    build_dual_lp,
    dual_biased_maxcorr,
    dual_constant,
    dual_vs_primal_check,
    dump_lp,
    partner_vertices,
    simplex_solve,
)
from niss.oracle import brute_force_biased_maxcorr


def lp(c, a, senses, b, bounds=None, maximize=True):
    return LpProblem(np.array(c, float), np.array(a, float), tuple(senses), np.array(b, float), bounds, maximize)


def test_single_variable():
    sol = simplex_solve(lp([1.0], [[1.0]], ["<="], [1.0]))
    assert sol.objective == pytest.approx(1.0) and sol.x[0] == pytest.approx(1.0)


def test_textbook_maximum_and_duals():
    prob = lp([3, 5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18])
    sol = simplex_solve(prob)
    assert sol.objective == pytest.approx(36.0)
    assert np.allclose(sol.x, [2, 6])
    assert np.allclose(sol.duals, [0, 1.5, 1])
    assert sol.duals @ prob.rhs == pytest.approx(36.0)


def test_free_variable_makes_minimum_unbounded():
    # y free: along x + y = 3 the objective is 3 + y, unbounded below
    prob = lp([1, 2], [[1, 1], [1, -1]], ["=", ">="], [3, -1], bounds=((0, None), (None, None)), maximize=False)
    ref = linprog([1, 2], A_ub=[[-1, 1]], b_ub=[1], A_eq=[[1, 1]], b_eq=[3], bounds=[(0, None), (None, None)])
    assert ref.status == 3
    with pytest.raises(UnboundedLpError):
        simplex_solve(prob)


def test_bounded_minimization():
    prob = lp([1, 2], [[1, 1], [1, -1]], ["=", ">="], [3, -1], bounds=((0, 5), (-1, None)), maximize=False)
    sol = simplex_solve(prob)
    assert sol.objective == pytest.approx(2.0) and np.allclose(sol.x, [4, -1])


def test_infeasible():
    with pytest.raises(InfeasibleLpError):
        simplex_solve(lp([1, 1], [[1, 1], [1, 1]], ["<=", ">="], [1, 2]))


def test_degenerate_redundant_rows_terminate():
    a = [[1, 1], [1, 1], [2, 2], [1, 0], [0, 1], [1, -1]]
    prob = lp([1, 1], a, ["<=", "<=", "<=", "<=", "<=", "="], [1, 1, 2, 1, 1, 0])
    sol = simplex_solve(prob)
    assert sol.objective == pytest.approx(1.0)


def test_beale_cycling_example_terminates():
    # classic instance that cycles under the largest-coefficient rule
    c = [0.75, -150, 0.02, -6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = simplex_solve(lp(c, a, ["<="] * 3, [0, 0, 1]))
    assert sol.objective == pytest.approx(0.05)


@pytest.mark.parametrize("seed", range(60))
def test_random_lps_match_highs(seed):
    r = np.random.default_rng(seed)
    m, n = r.integers(2, 7), r.integers(2, 7)
    a = r.normal(size=(m, n))
    b = r.normal(size=m) + (0.5 if seed % 3 else -0.5)
    c = r.normal(size=n)
    senses = r.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2])
    bounds = [(None, None) if r.random() < 0.3 else (0.0, float(r.uniform(1, 3)) if r.random() < 0.5 else None) for _ in range(n)]
    prob = LpProblem(c, a, tuple(senses), b, tuple(bounds), True)
    ub = [row if s == "<=" else -row for row, s in zip(a, senses) if s != "="]
    bub = [bi if s == "<=" else -bi for bi, s in zip(b, senses) if s != "="]
    eq = [row for row, s in zip(a, senses) if s == "="]
    beq = [bi for bi, s in zip(b, senses) if s == "="]
    kw = dict(A_ub=ub or None, b_ub=bub or None, A_eq=eq or None, b_eq=beq or None, bounds=bounds, method="highs")
    ref = linprog(-c, **kw)
    if ref.status == 2:
        # presolve folds "unbounded" into "infeasible"; settle feasibility on its own
        ref.status = 2 if linprog(np.zeros(n), **kw).status == 2 else 3
    if ref.status == 0:
        sol = simplex_solve(prob)
        assert sol.objective == pytest.approx(-ref.fun, abs=1e-7)
    elif ref.status == 2:
        with pytest.raises(InfeasibleLpError):
            simplex_solve(prob)
    elif ref.status == 3:
        with pytest.raises(UnboundedLpError):
            simplex_solve(prob)


def test_dump_lp_lists_rows():
    text = dump_lp(lp([3, 5], [[1, 0], [0, 2]], ["<=", "<="], [4, 12]))
    assert "<=" in text and "12" in text


def test_instance_guards():
    with pytest.raises(ValueError, match="uniform"):
        DualInstance(binary_joint(0.6, 0.7, 0.4), 1, 0.5, 0.5)
    with pytest.raises(ValueError, match="cap"):
        DualInstance(dsbs(0.4), 9, 0.5, 0.5)


def test_plain_multiplier_form_is_unbounded():
    inst = DualInstance(dsbs(0.4), 1, 0.5, 0.5)
    with pytest.raises(UnboundedLpError):
        simplex_solve(build_dual_lp(inst))


def test_partner_vertices_are_feasible():
    verts = list(partner_vertices(4, -0.3))
    assert verts
    for v in verts:
        assert np.abs(v).max() <= 1 and v.mean() == pytest.approx(-0.3)
        assert np.sum(np.abs(np.abs(v) - 1) > 1e-12) <= 1


def test_single_letter_value():
    res = dual_biased_maxcorr(DualInstance(dsbs(0.4), 1, 0.5, 0.5))
    assert res.value == pytest.approx(0.4, abs=1e-9)


def test_independent_gives_bias_product():
    inst = DualInstance(JointPmf(np.full((2, 2), 0.25)), 2, 0.25, 0.75)
    res = dual_biased_maxcorr(inst)
    assert res.value == pytest.approx(dual_constant(inst), abs=1e-9)
    assert np.allclose(res.lambda_plus[1:] - res.lambda_minus[1:], 0, atol=1e-9)


def highs_biased_maxcorr(joint, d, qu1, qv1):
    """Max over partner vertices of the f-side LP, solved by HiGHS."""
    full = joint.power(d)
    n = full.shape[0]
    px = full.sum(axis=1)
    best = -np.inf
    for g in partner_vertices(n, 2 * qv1 - 1):
        res = linprog(-(full @ g), A_eq=[px], b_eq=[2 * qu1 - 1], bounds=[(-1, 1)] * n, method="highs")
        best = max(best, -res.fun)
    return best


@pytest.mark.parametrize("qu,qv", [(0.25, 0.25), (0.25, 0.5), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75)])
def test_d2_matches_exhaustive_search(qu, qv):
    j = dsbs(0.4)
    res = dual_biased_maxcorr(DualInstance(j, 2, qu, qv))
    oracle = brute_force_biased_maxcorr(j, 2, int(qu * 4), int(qv * 4))
    assert res.value == pytest.approx(oracle.value, abs=1e-6)


def test_d2_known_values():
    j = dsbs(0.4)
    assert dual_biased_maxcorr(DualInstance(j, 2, 0.25, 0.25)).value == pytest.approx(0.49, abs=1e-9)
    assert dual_biased_maxcorr(DualInstance(j, 2, 0.25, 0.5)).value == pytest.approx(0.2, abs=1e-9)
    assert dual_biased_maxcorr(DualInstance(j, 2, 0.75, 0.25)).value == pytest.approx(-0.09, abs=1e-9)


@pytest.mark.parametrize("qu,qv,rho", [(0.3, 0.6, 0.4), (0.1, 0.45, 0.7), (0.6, 0.35, -0.3)])
def test_fractional_biases_match_highs(qu, qv, rho):
    j = dsbs(rho)
    res = dual_biased_maxcorr(DualInstance(j, 2, qu, qv))
    assert res.value == pytest.approx(highs_biased_maxcorr(j, 2, qu, qv), abs=1e-7)


@pytest.mark.parametrize("qu,qv", [(0.3, 0.6), (0.25, 0.25), (0.6, 0.35)])
def test_recovered_functions_are_primal_optimal(qu, qv):
    j = dsbs(0.4)
    res = dual_biased_maxcorr(DualInstance(j, 2, qu, qv))
    full = j.power(2)
    assert res.box_violation <= 1e-8
    assert full.sum(axis=1) @ res.f_values == pytest.approx(2 * qu - 1, abs=1e-9)
    assert full.sum(axis=0) @ res.g_values == pytest.approx(2 * qv - 1, abs=1e-9)
    assert res.f_values @ full @ res.g_values == pytest.approx(res.value, abs=1e-9)


def test_weak_duality_against_sampled_pairs():
    j = dsbs(0.4)
    full = j.power(2)
    value = dual_biased_maxcorr(DualInstance(j, 2, 0.3, 0.6)).value
    r = np.random.default_rng(4)
    from niss.fpath import project_box_mean

    w = np.full(4, 0.25)
    for _ in range(500):
        f = project_box_mean(r.uniform(-2, 2, 4), w, -0.4)
        g = project_box_mean(r.uniform(-2, 2, 4), w, 0.2)
        assert f @ full @ g <= value + 1e-12


def test_dual_vs_primal_report():
    rep = dual_vs_primal_check(DualInstance(dsbs(0.4), 2, 0.25, 0.25))
    assert abs(rep.gap) < 1e-6 and rep.box_violation <= 1e-8
