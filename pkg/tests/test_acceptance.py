"""Acceptance suite.

Each test covers one numbered criterion, recomputes its expected values from
an independent oracle (exhaustive enumeration, explicit product matrices,
closed forms, or simulation confidence intervals) at the stated tolerance,
and prints one PASS/FAIL line. Run with ``pytest tests/test_acceptance.py -s``
to see the lines.
"""

import itertools
import math

import numpy as np

from credalmeet import (
    CredalMatrix,
    StateSpace,
    TransitionMatrix,
    hitting_times,
    meet,
    meeting_times,
    policy_iteration,
    quotient_consistency_check,
    selection_matrix,
    simulate_hitting,
    value_iteration,
)
from credalmeet.selfcheck import bundled_model_path
from credalmeet.modelio import load_model

from generators import (
    random_credal_matrix,
    random_selection,
    random_targets,
    random_transition_matrix,
)


def _criterion(num, name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {num}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------

def test_criterion_1_policy_vs_value_iteration():
    rng = np.random.default_rng(101)
    worst = 0.0
    infinite_cases = 0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        model = random_credal_matrix(rng, n=n, max_vertices=4, dense_prob=0.45)
        targets = random_targets(rng, n)
        for sense in ("upper", "lower"):
            p = policy_iteration(model, targets, sense)
            v = value_iteration(model, targets, sense, tol=1e-11, max_iter=100_000)
            assert p.converged and v.converged
            assert np.array_equal(np.isinf(p.values), np.isinf(v.values))
            if np.isinf(p.values).any():
                infinite_cases += 1
            finite = np.isfinite(p.values)
            if finite.any():
                worst = max(worst, float(np.max(np.abs(p.values[finite] - v.values[finite]))))
    _criterion(
        1, "policy and value iteration agree",
        worst <= 1e-8 and infinite_cases > 0,
        f"200 models, max gap {worst:.2e}, {infinite_cases} runs with infinite states",
    )


# ---------------------------------------------------------------------------

def _brute_force_meeting(model, sense):
    """Enumerate every stationary joint selection on the ordered pair space,
    solve each precise chain, and keep the componentwise extreme. Built from
    raw outer products so it shares nothing with the joint solver path."""
    n = model.size
    pairs = list(itertools.product(range(n), repeat=2))
    index = {p: i for i, p in enumerate(pairs)}
    off = [p for p in pairs if p[0] != p[1]]
    space = StateSpace(tuple(f"p{x}_{y}" for x, y in pairs))
    options = {
        p: list(itertools.product(range(model.vertex_count(p[0])),
                                  range(model.vertex_count(p[1]))))
        for p in off
    }
    rows_for = {
        p: {
            c: np.outer(model.vertices(p[0])[c[0]], model.vertices(p[1])[c[1]]).ravel()
            for c in options[p]
        }
        for p in off
    }
    base = np.zeros((n * n, n * n))
    diag = [index[(x, x)] for x in range(n)]
    for i in diag:
        base[i, i] = 1.0
    best = None
    keep = np.maximum if sense == "upper" else np.minimum
    for combo in itertools.product(*[options[p] for p in off]):
        entries = base.copy()
        for p, c in zip(off, combo):
            entries[index[p]] = rows_for[p][c]
        h = hitting_times(TransitionMatrix(space, entries), diag)
        best = h if best is None else keep(best, h)
    return best.reshape(n, n)


def test_criterion_2_meeting_brute_force_equivalence():
    rng = np.random.default_rng(202)
    worst = 0.0
    infinite_cases = 0
    for k in range(100):
        n = 2 if k % 2 == 0 else 3
        max_vertices = 3 if n == 2 else 2
        model = random_credal_matrix(rng, n=n, max_vertices=max_vertices, dense_prob=0.4)
        for sense in ("upper", "lower"):
            oracle = _brute_force_meeting(model, sense)
            got = meet(model, 2, "vacuous", sense, "full").matrix()
            assert np.array_equal(np.isinf(got), np.isinf(oracle))
            if np.isinf(oracle).any():
                infinite_cases += 1
            finite = np.isfinite(oracle)
            worst = max(worst, float(np.max(np.abs(got[finite] - oracle[finite]))))
    _criterion(
        2, "vacuous meeting bounds equal the exhaustive selection extremes",
        worst <= 1e-8 and infinite_cases > 0,
        f"100 instances, max gap {worst:.2e}, {infinite_cases} runs with infinite pairs",
    )


# ---------------------------------------------------------------------------

def test_criterion_3_precise_meeting_consistency():
    rng = np.random.default_rng(303)
    worst_residual = 0.0
    worst_vs_product = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        t = random_transition_matrix(rng, n, dense_prob=0.6)
        s = random_transition_matrix(rng, n, dense_prob=0.6)
        m = meeting_times(t, s)
        assert (np.diag(m) == 0).all()
        finite = np.isfinite(m)
        ones = 1.0 - np.eye(n)
        rhs = ones + t.entries @ np.where(finite, m, 0.0) @ s.entries.T
        off = finite & ~np.eye(n, dtype=bool)
        if off.any():
            worst_residual = max(worst_residual, float(np.max(np.abs(m[off] - rhs[off]))))
        # independent product-space solve through an explicit joint matrix
        joint = np.kron(t.entries, s.entries)
        space = StateSpace(tuple(f"q{i}" for i in range(n * n)))
        diag = [x * n + x for x in range(n)]
        h = hitting_times(TransitionMatrix(space, joint), diag).reshape(n, n)
        assert np.array_equal(np.isinf(h), ~finite)
        worst_vs_product = max(
            worst_vs_product, float(np.max(np.abs(h[finite] - m[finite])))
        )
    _criterion(
        3, "precise meeting times solve their defining system",
        worst_residual <= 1e-10 and worst_vs_product <= 1e-10,
        f"100 pairs, residual {worst_residual:.2e}, product gap {worst_vs_product:.2e}",
    )


# ---------------------------------------------------------------------------

def test_criterion_4_quotient_losslessness():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        model = random_credal_matrix(rng, n=n, max_vertices=3, dense_prob=0.45)
        for sense in ("upper", "lower"):
            rep = quotient_consistency_check(model, 2, "vacuous", sense)
            assert rep.infinity_matches, rep.mismatched
            assert rep.quotient_states == math.comb(n + 1, 2)
            worst = max(worst, rep.max_discrepancy)
    for _ in range(10):
        model = random_credal_matrix(rng, n=3, max_vertices=2, dense_prob=0.5)
        for sense in ("upper", "lower"):
            rep = quotient_consistency_check(model, 3, "vacuous", sense)
            assert rep.infinity_matches, rep.mismatched
            assert rep.quotient_states == math.comb(3 + 3 - 1, 3)
            worst = max(worst, rep.max_discrepancy)
    _criterion(
        4, "quotient values match the full product",
        worst <= 1e-8,
        f"50 pair models + 10 triple models, max discrepancy {worst:.2e}",
    )


# ---------------------------------------------------------------------------

def test_criterion_5_envelope():
    rng = np.random.default_rng(505)
    checked = 0
    for _ in range(50):
        model = random_credal_matrix(rng, max_vertices=4, dense_prob=0.45)
        targets = random_targets(rng, model.size)
        up = policy_iteration(model, targets, "upper").values
        lo = policy_iteration(model, targets, "lower").values
        for _ in range(20):
            sel = random_selection(rng, model)
            t = TransitionMatrix(model.space, selection_matrix(model, sel))
            h = hitting_times(t, targets)
            assert not (np.isinf(lo) & np.isfinite(h)).any()
            assert not (np.isinf(h) & np.isfinite(up)).any()
            both_lo = np.isfinite(lo) & np.isfinite(h)
            both_up = np.isfinite(h) & np.isfinite(up)
            assert (lo[both_lo] <= h[both_lo] + 1e-9).all()
            assert (h[both_up] <= up[both_up] + 1e-9).all()
            checked += 1
    _criterion(5, "every stationary selection sits inside the envelope",
               True, f"{checked} selections checked")


# ---------------------------------------------------------------------------

def test_criterion_6_mixture_endpoints_and_affinity():
    model = CredalMatrix.from_rows(
        ["a", "b"], [[[0.5, 0.5], [1, 0]], [[0.5, 0.5], [0, 1]]]
    )
    sel = {(0, 1): (0, 0), (1, 0): (0, 0)}
    worst = 0.0
    for sense in ("upper", "lower"):
        deg = meet(model, 2, "degenerate", mode="full", selection=sel)
        vac = meet(model, 2, "vacuous", sense, "full")
        at0 = meet(model, 2, "mixture", sense, "full", selection=sel, epsilon=0.0)
        at1 = meet(model, 2, "mixture", sense, "full", selection=sel, epsilon=1.0)
        assert np.array_equal(at0.values, deg.values)
        assert np.array_equal(at1.values, vac.values)
        for eps in (0.25, 0.5, 0.75):
            mid = meet(model, 2, "mixture", sense, "full", selection=sel, epsilon=eps)
            both = np.isfinite(deg.values) & np.isfinite(vac.values)
            want = (1 - eps) * deg.values[both] + eps * vac.values[both]
            if both.any():
                worst = max(worst, float(np.max(np.abs(mid.values[both] - want))))
            either = np.isinf(deg.values) | np.isinf(vac.values)
            assert np.isinf(mid.values[either]).all()
    _criterion(6, "mixture endpoints are exact and interiors affine",
               worst <= 1e-12, f"max affine gap {worst:.2e}")


# ---------------------------------------------------------------------------

def test_criterion_7_five_state_walk():
    model = load_model(bundled_model_path("five-state"))
    # the documented best-case move structure of the bundled model
    want_edges = {(0, 1), (1, 0), (1, 3), (2, 0), (2, 1), (2, 2), (3, 4), (4, 2)}
    edges = {
        (i, j)
        for i in range(model.size)
        for j in range(model.size)
        if any(v[j] > 0 for v in model.vertices(i))
    }
    assert edges == want_edges
    res = meet(model, 2, "vacuous", "upper", "quotient")
    prod = res.product
    pair_12 = prod.index_of((0, 1))
    pair_23 = prod.index_of((1, 2))
    ok = (
        pair_12 in res.classification.absorbing
        and pair_23 in res.classification.unsafe
        and math.isinf(res.values[pair_12])
        and math.isinf(res.values[pair_23])
    )
    _criterion(7, "five-state walk: (1,2) absorbing, (2,3) unsafe, both unbounded", ok)


# ---------------------------------------------------------------------------

def test_criterion_8_monte_carlo_cross_check():
    geo = TransitionMatrix.from_entries(["a", "b"], [[0.5, 0.5], [0, 1]])
    s = simulate_hitting(geo, [1], start=0, trials=100_000, horizon=10_000, seed=1234)
    assert s.censored == 0
    half_width = 3.0 * math.sqrt(s.variance / s.uncensored)
    ok_geo = abs(s.mean - 2.0) <= half_width
    cycle = TransitionMatrix.from_entries(
        ["a", "b", "c"], [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    )
    c = simulate_hitting(cycle, [2], start=0, trials=1_000, horizon=10, seed=5)
    ok_cycle = c.mean == 2.0 and c.variance == 0.0 and c.censored == 0
    _criterion(
        8, "simulation agrees with the analytic means",
        ok_geo and ok_cycle,
        f"geometric mean {s.mean:.4f} within {half_width:.4f} of 2.0",
    )


# ---------------------------------------------------------------------------

def test_criterion_9_hand_derived_golden_values():
    picker = CredalMatrix.from_rows(
        ["a", "b"], [[[0.5, 0.5], [0.9, 0.1]], [[0, 1]]]
    )
    # only two stationary selections exist; their exact values are 2 and 10
    hands = {"upper": 10.0, "lower": 2.0}
    ok = True
    for sense, want in hands.items():
        p = policy_iteration(picker, [1], sense)
        v = value_iteration(picker, [1], sense, tol=1e-13, max_iter=200_000)
        ok &= abs(p.values[0] - want) <= 1e-10 and abs(v.values[0] - want) <= 1e-10

    hold_or_mix = CredalMatrix.from_rows(
        ["a", "b"], [[[0.5, 0.5], [1, 0]], [[0.5, 0.5], [0, 1]]]
    )
    # the exhaustive oracle over all 16 stationary joint selections is the
    # authority for the lower bound; it evaluates to exactly 2
    oracle_lo = _brute_force_meeting(hold_or_mix, "lower")
    lo = meet(hold_or_mix, 2, "vacuous", "lower", "full").matrix()
    up = meet(hold_or_mix, 2, "vacuous", "upper", "full").matrix()
    ok &= abs(oracle_lo[0, 1] - 2.0) <= 1e-10
    ok &= abs(lo[0, 1] - oracle_lo[0, 1]) <= 1e-10
    ok &= math.isinf(up[0, 1])
    _criterion(
        9, "hand-derived goldens: hitting 10 and 2, meeting 2 and unbounded",
        ok,
        f"lower meeting {lo[0, 1]:.12f}",
    )
