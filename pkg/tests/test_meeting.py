import itertools
import math

import numpy as np
import pytest

from credalmeet import (
    CredalMatrix,
    StateSpace,
    TransitionMatrix,
    build_product_space,
    exhaustive_meeting_times,
    hitting_times,
    joint_transition_weight,
    meet,
    meeting_times,
    quotient_consistency_check,
)
from credalmeet.meeting import JointChoices

from generators import random_credal_matrix, random_transition_matrix


def hold_or_mix():
    return CredalMatrix.from_rows(
        ["a", "b"], [[[0.5, 0.5], [1, 0]], [[0.5, 0.5], [0, 1]]]
    )


# -------------------------------------------------------------- product space

def test_product_space_sizes():
    sp = StateSpace(("a", "b"))
    assert build_product_space(sp, 2, "full").size == 4
    assert build_product_space(sp, 2, "quotient").size == 3
    sp5 = StateSpace(tuple("abcde"))
    assert build_product_space(sp5, 3, "quotient").size == math.comb(7, 3) == 35
    assert build_product_space(sp5, 3, "full").size == 125


def test_product_space_diagonal_and_index():
    sp = StateSpace(("a", "b", "c"))
    full = build_product_space(sp, 2, "full")
    assert {full.states[i] for i in full.diagonal} == {(0, 0), (1, 1), (2, 2)}
    quot = build_product_space(sp, 2, "quotient")
    assert quot.index_of((2, 1)) == quot.index_of((1, 2))
    assert quot.label(quot.index_of((0, 2))) == "(a,c)"
    with pytest.raises(KeyError):
        full.index_of((0, 9))


def test_product_space_guards():
    sp = StateSpace(("a", "b"))
    with pytest.raises(ValueError):
        build_product_space(sp, 1, "full")
    with pytest.raises(ValueError):
        build_product_space(sp, 21, "full")  # 2**21 joint states
    with pytest.raises(ValueError):
        build_product_space(sp, 2, "sideways")


# -------------------------------------------------------------- joint weights

def test_joint_weight_is_product_of_factor_rows():
    rng = np.random.default_rng(51)
    m = random_credal_matrix(rng, n=3, max_vertices=2)
    prod = build_product_space(m.space, 2, "full")
    for (x, y) in [(0, 1), (2, 0)]:
        for cx in range(m.vertex_count(x)):
            for cy in range(m.vertex_count(y)):
                for (a, b) in itertools.product(range(3), repeat=2):
                    w = joint_transition_weight(m, prod, (x, y), (cx, cy), (a, b))
                    assert w == pytest.approx(
                        m.vertices(x)[cx][a] * m.vertices(y)[cy][b], abs=0
                    )


def test_joint_weight_quotient_cohabitation():
    m = CredalMatrix.from_rows(["a", "b"], [[[0.5, 0.5]], [[0.5, 0.5]]])
    prod = build_product_space(m.space, 2, "quotient")
    assert joint_transition_weight(m, prod, (0, 0), (0, 0), (0, 1)) == pytest.approx(0.5)
    assert joint_transition_weight(m, prod, (0, 0), (0, 0), (0, 0)) == pytest.approx(0.25)


def test_joint_weights_sum_to_one():
    rng = np.random.default_rng(53)
    m = random_credal_matrix(rng, n=3, max_vertices=3)
    for mode in ("full", "quotient"):
        prod = build_product_space(m.space, 2, mode)
        view = JointChoices(m, prod)
        for i in range(prod.size):
            for c in range(view.nchoices(i)):
                row = view.row(i, c)
                assert row.sum() == pytest.approx(1.0, abs=1e-12)
                total = sum(
                    joint_transition_weight(
                        m, prod, prod.states[i], view.choice_tuples(i)[c], prod.states[j]
                    )
                    for j in range(prod.size)
                )
                assert total == pytest.approx(1.0, abs=1e-12)


def test_joint_values_match_rows_with_infinities():
    rng = np.random.default_rng(57)
    m = random_credal_matrix(rng, n=3, max_vertices=3, dense_prob=0.3)
    for mode in ("full", "quotient"):
        prod = build_product_space(m.space, 2, mode)
        view = JointChoices(m, prod)
        f = rng.uniform(0, 5, prod.size)
        f[rng.random(prod.size) < 0.3] = math.inf
        for i in range(prod.size):
            vals = view.values(i, f)
            for c in range(view.nchoices(i)):
                row = view.row(i, c)
                inf_mask = np.isinf(f)
                expect = (
                    math.inf
                    if (row[inf_mask] > 0).any()
                    else float(row @ np.where(inf_mask, 0.0, f))
                )
                assert vals[c] == pytest.approx(expect, abs=1e-12) or (
                    math.isinf(vals[c]) and math.isinf(expect)
                )


# ----------------------------------------------------------------------- meet

def test_degenerate_meet_matches_independent_product():
    rng = np.random.default_rng(59)
    t = random_transition_matrix(rng, 3)
    m = CredalMatrix.precise(t.space.labels, t.entries)
    res = meet(m, 2, "degenerate", mode="full")
    want = meeting_times(t, t)
    got = res.matrix()
    finite = np.isfinite(want)
    assert np.array_equal(np.isfinite(got), finite)
    assert np.allclose(got[finite], want[finite], atol=1e-10)


def test_vacuous_meet_reduces_to_degenerate_for_singleton_rows():
    rng = np.random.default_rng(61)
    t = random_transition_matrix(rng, 3)
    m = CredalMatrix.precise(t.space.labels, t.entries)
    for mode in ("full", "quotient"):
        deg = meet(m, 2, "degenerate", mode=mode)
        for sense in ("upper", "lower"):
            vac = meet(m, 2, "vacuous", sense, mode)
            assert np.allclose(vac.values, deg.values, atol=1e-10, equal_nan=False)


def test_hold_or_mix_bounds():
    m = hold_or_mix()
    up = meet(m, 2, "vacuous", "upper", "full")
    lo = meet(m, 2, "vacuous", "lower", "full")
    assert math.isinf(up.matrix()[0, 1])
    oracle = exhaustive_meeting_times(m, "lower")
    assert lo.matrix()[0, 1] == pytest.approx(oracle[0, 1], abs=1e-10)
    assert lo.matrix()[0, 1] == pytest.approx(2.0, abs=1e-10)
    # diagonal is always zero
    assert up.matrix()[0, 0] == 0.0 and lo.matrix()[1, 1] == 0.0


def test_meet_brute_force_equivalence_small():
    rng = np.random.default_rng(67)
    for _ in range(10):
        m = random_credal_matrix(rng, n=2, max_vertices=3, dense_prob=0.5)
        for sense in ("upper", "lower"):
            oracle = exhaustive_meeting_times(m, sense)
            got = meet(m, 2, "vacuous", sense, "full").matrix()
            assert np.array_equal(np.isinf(got), np.isinf(oracle))
            finite = np.isfinite(oracle)
            assert np.allclose(got[finite], oracle[finite], atol=1e-8)


def test_full_mode_values_are_permutation_invariant():
    rng = np.random.default_rng(71)
    m = random_credal_matrix(rng, n=3, max_vertices=2, dense_prob=0.4)
    for sense in ("upper", "lower"):
        res = meet(m, 2, "vacuous", sense, "full")
        mat = res.matrix()
        finite = np.isfinite(mat)
        assert (finite == finite.T).all()
        assert np.allclose(mat[finite], mat.T[finite], atol=1e-9)


def test_degenerate_envelope():
    rng = np.random.default_rng(73)
    m = random_credal_matrix(rng, n=3, max_vertices=2, dense_prob=0.5)
    up = meet(m, 2, "vacuous", "upper", "full").values
    lo = meet(m, 2, "vacuous", "lower", "full").values
    prod = build_product_space(m.space, 2, "full")
    view = JointChoices(m, prod)
    for _ in range(10):
        sel = {
            prod.states[i]: tuple(
                int(rng.integers(0, m.vertex_count(s))) for s in prod.states[i]
            )
            for i in range(prod.size)
        }
        deg = meet(m, 2, "degenerate", mode="full", selection=sel).values
        assert ((lo <= deg + 1e-9) | np.isinf(lo) & np.isinf(deg)).all()
        assert ((deg <= up + 1e-9) | np.isinf(up)).all()


def test_quotient_consistency_random_models():
    rng = np.random.default_rng(79)
    for _ in range(8):
        m = random_credal_matrix(rng, n=int(rng.integers(2, 4)), max_vertices=2, dense_prob=0.4)
        for sense in ("upper", "lower"):
            rep = quotient_consistency_check(m, 2, "vacuous", sense)
            assert rep.infinity_matches, rep.mismatched
            assert rep.max_discrepancy <= 1e-8
    m3 = random_credal_matrix(rng, n=3, max_vertices=2, dense_prob=0.5)
    rep = quotient_consistency_check(m3, 3, "vacuous", "upper")
    assert rep.infinity_matches and rep.max_discrepancy <= 1e-8
    assert rep.quotient_states == math.comb(3 + 3 - 1, 3)


def test_quotient_consistency_degenerate_selection():
    m = hold_or_mix()
    sel = {(0, 1): (1, 0), (0, 0): (0, 1), (1, 1): (1, 0)}
    rep = quotient_consistency_check(m, 2, "degenerate", selection=sel)
    assert rep.infinity_matches and rep.max_discrepancy <= 1e-12


def test_mixture_endpoints_and_affinity():
    m = hold_or_mix()
    sel = {(0, 1): (0, 0), (1, 0): (0, 0)}
    deg = meet(m, 2, "degenerate", mode="full", selection=sel)
    for sense in ("upper", "lower"):
        vac = meet(m, 2, "vacuous", sense, "full")
        at0 = meet(m, 2, "mixture", sense, "full", selection=sel, epsilon=0.0)
        at1 = meet(m, 2, "mixture", sense, "full", selection=sel, epsilon=1.0)
        assert np.array_equal(at0.values, deg.values)
        assert np.array_equal(at1.values, vac.values)
        for eps in (0.25, 0.5, 0.75):
            mid = meet(m, 2, "mixture", sense, "full", selection=sel, epsilon=eps)
            both = np.isfinite(deg.values) & np.isfinite(vac.values)
            want = (1 - eps) * deg.values[both] + eps * vac.values[both]
            assert np.max(np.abs(mid.values[both] - want)) <= 1e-12
            # any positively weighted infinite component forces infinity
            either = np.isinf(deg.values) | np.isinf(vac.values)
            assert np.isinf(mid.values[either]).all()


def test_mixture_requires_epsilon():
    m = hold_or_mix()
    with pytest.raises(ValueError):
        meet(m, 2, "mixture", "upper", "full", epsilon=None)
    with pytest.raises(ValueError):
        meet(m, 2, "mixture", "upper", "full", epsilon=1.5)
    with pytest.raises(ValueError):
        meet(m, 2, "nonsense")


def test_degenerate_selection_validation():
    m = hold_or_mix()
    with pytest.raises(ValueError):
        meet(m, 2, "degenerate", mode="full", selection={(0, 1): (0, 7)})
    with pytest.raises(KeyError):
        meet(m, 2, "degenerate", mode="full", selection={(0, 9): (0, 0)})


def test_exhaustive_oracle_guard():
    rng = np.random.default_rng(83)
    m = random_credal_matrix(rng, n=4, max_vertices=4, dense_prob=1.0)
    with pytest.raises(ValueError):
        exhaustive_meeting_times(m, "upper", max_assignments=10)


def test_three_agents_quotient_meet_runs():
    rng = np.random.default_rng(89)
    m = random_credal_matrix(rng, n=3, max_vertices=2, dense_prob=0.8)
    res = meet(m, 3, "vacuous", "upper", "quotient")
    assert res.converged
    assert res.values[res.product.index_of((0, 0, 0))] == 0.0
    # independent check against the hitting times of the assembled joint
    # chain under the returned selection
    prod = res.product
    view = JointChoices(m, prod)
    entries = np.zeros((prod.size, prod.size))
    for i in range(prod.size):
        if i in prod.diagonal:
            entries[i, i] = 1.0
        else:
            entries[i] = view.row(i, view.flat_choice(i, res.selections[i]))
    space = StateSpace(tuple(prod.label(i) for i in range(prod.size)))
    h = hitting_times(TransitionMatrix(space, entries), sorted(prod.diagonal))
    finite = np.isfinite(res.values)
    assert np.allclose(h[finite], res.values[finite], atol=1e-9)
