import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semmatch.embed import ClassMatrix, normalize_set, sim_from_array, visual_similarity
from semmatch.errors import EmptyMatrix, NonFiniteEntry, PromptSetMismatch
from semmatch.matchers import (
    assign_argmax,
    assign_hungarian,
    brute_force_max_total,
    match_discrete,
)

small_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 5), st.integers(1, 5)),
    elements=st.floats(-5, 5, allow_nan=False),
)


def idx_pairs(result):
    return sorted((int(t), int(s)) for t, s in result.pairs)


# --- argmax ---

def test_argmax_identity():
    r = assign_argmax(sim_from_array(np.eye(3)))
    assert idx_pairs(r) == [(0, 0), (1, 1), (2, 2)]
    assert r.total_score == pytest.approx(3.0)
    assert not r.unmatched_targets and not r.unmatched_sources


def test_argmax_mode_collapse():
    r = assign_argmax(sim_from_array([[0.9, 0.8], [0.1, 0.2]]))
    assert idx_pairs(r) == [(0, 0), (0, 1)]  # both sources onto target 0
    assert r.unmatched_targets == frozenset({"1"})
    assert r.total_score == pytest.approx(1.7)


def test_argmax_tie_breaks_to_lowest_target():
    r = assign_argmax(sim_from_array([[0.5], [0.5]]))
    assert idx_pairs(r) == [(0, 0)]


def test_argmax_empty_matrix():
    with pytest.raises(EmptyMatrix):
        assign_argmax(sim_from_array(np.zeros((0, 3))))


@settings(max_examples=50, deadline=None)
@given(small_matrices)
def test_argmax_monotone_invariance(entries):
    from hypothesis import assume

    base = assign_argmax(sim_from_array(entries))
    # power-of-two scaling is exact in floats, hence strictly increasing
    scaled = assign_argmax(sim_from_array(entries * 8.0))
    assert base.pairs == scaled.pairs
    squeezed = np.tanh(entries) * 3.0 + 7.0
    # float rounding may collapse distinct inputs; only then skip the example
    for col in range(entries.shape[1]):
        a, b = entries[:, col], squeezed[:, col]
        for i in range(len(a)):
            for j in range(len(a)):
                assume((a[i] < a[j]) == (b[i] < b[j]))
    assert assign_argmax(sim_from_array(squeezed)).pairs == base.pairs


def test_argmax_every_source_in_exactly_one_pair():
    rng = np.random.default_rng(0)
    s = sim_from_array(rng.standard_normal((4, 6)))
    r = assign_argmax(s)
    assert sorted(p[1] for p in r.pairs) == [str(i) for i in range(6)]


# --- hungarian ---

def test_hungarian_identity():
    r = assign_hungarian(sim_from_array(np.eye(4)))
    assert idx_pairs(r) == [(0, 0), (1, 1), (2, 2), (3, 3)]
    assert r.total_score == pytest.approx(4.0)


def test_hungarian_beats_greedy():
    r = assign_hungarian(sim_from_array([[0.9, 0.8], [0.85, 0.1]]))
    assert idx_pairs(r) == [(0, 1), (1, 0)]
    assert r.total_score == pytest.approx(1.65)


def test_hungarian_matches_brute_force_on_seeded_matrices():
    rng = np.random.default_rng(1234)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        entries = rng.standard_normal((n, n))
        got = assign_hungarian(sim_from_array(entries)).total_score
        want = brute_force_max_total(entries)
        assert got == pytest.approx(want, abs=1e-9)


def test_hungarian_rectangular_unmatched_on_larger_side():
    r = assign_hungarian(sim_from_array([[0.2, 0.9, 0.5]]))
    assert idx_pairs(r) == [(0, 1)]
    assert r.unmatched_sources == frozenset({"0", "2"})
    assert r.unmatched_targets == frozenset()

    tall = assign_hungarian(sim_from_array([[0.1], [0.9], [0.3]]))
    assert idx_pairs(tall) == [(1, 0)]
    assert tall.unmatched_targets == frozenset({"0", "2"})


def test_hungarian_rectangular_matches_brute_force():
    rng = np.random.default_rng(77)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        entries = rng.standard_normal((n, m))
        got = assign_hungarian(sim_from_array(entries)).total_score
        assert got == pytest.approx(brute_force_max_total(entries), abs=1e-9)


def test_hungarian_lexicographic_tie_break():
    # every permutation of a constant matrix is optimal; canonical = diagonal
    r = assign_hungarian(sim_from_array(np.full((3, 3), 0.7)))
    assert idx_pairs(r) == [(0, 0), (1, 1), (2, 2)]
    # two optima: {(0,0),(1,1)} and {(0,1),(1,0)} both total 1.0
    r2 = assign_hungarian(sim_from_array([[0.6, 0.4], [0.4, 0.6]]))
    assert idx_pairs(r2) == [(0, 0), (1, 1)]
    r3 = assign_hungarian(sim_from_array([[0.4, 0.6], [0.6, 0.4]]))
    assert idx_pairs(r3) == [(0, 1), (1, 0)]


def test_hungarian_shift_invariance():
    rng = np.random.default_rng(5)
    entries = rng.standard_normal((5, 5))
    base = assign_hungarian(sim_from_array(entries))
    for c in (-3.5, 0.25, 10.0):
        shifted = assign_hungarian(sim_from_array(entries + c))
        assert shifted.pairs == base.pairs


def test_hungarian_rejects_bad_input():
    with pytest.raises(EmptyMatrix):
        assign_hungarian(sim_from_array(np.zeros((2, 0))))
    with pytest.raises(NonFiniteEntry):
        assign_hungarian(sim_from_array([[1.0, np.nan]]))


@settings(max_examples=40, deadline=None)
@given(small_matrices, st.randoms(use_true_random=False))
def test_permutation_equivariance(entries, rnd):
    n = entries.shape[0]
    perm = list(range(n))
    rnd.shuffle(perm)
    base_ids = [f"t{i}" for i in range(n)]
    s = sim_from_array(entries, row_ids=base_ids)
    sp = sim_from_array(entries[perm], row_ids=[base_ids[i] for i in perm])
    for solver in (assign_argmax, assign_hungarian):
        a = solver(s)
        b = solver(sp)
        # identical id-level decisions: tie rules key on indices, which the
        # permutation reshuffles, so compare achieved totals and pair counts
        assert len(a.pairs) == len(b.pairs)
        assert a.total_score == pytest.approx(b.total_score, abs=1e-9)


def test_permutation_equivariance_unique_optimum_exact():
    rng = np.random.default_rng(9)
    entries = rng.standard_normal((5, 5))  # ties have measure zero
    perm = [3, 0, 4, 1, 2]
    ids = [f"t{i}" for i in range(5)]
    for solver in (assign_argmax, assign_hungarian):
        a = solver(sim_from_array(entries, row_ids=ids))
        b = solver(sim_from_array(entries[perm], row_ids=[ids[i] for i in perm]))
        assert a.pairs == b.pairs


def test_self_match_identity():
    rng = np.random.default_rng(21)
    es = normalize_set(rng.standard_normal((6, 12)), [f"c{i}" for i in range(6)])
    s = visual_similarity(es, es)
    r = assign_hungarian(s)
    assert sorted(r.pairs) == [(f"c{i}", f"c{i}") for i in range(6)]
    assert r.total_score == pytest.approx(6.0, abs=1e-6)


def test_total_score_equals_sum_of_entries():
    rng = np.random.default_rng(30)
    entries = rng.standard_normal((4, 4))
    s = sim_from_array(entries)
    for solver in (assign_argmax, assign_hungarian):
        r = solver(s)
        total = sum(entries[int(t), int(c)] for t, c in r.pairs)
        assert r.total_score == pytest.approx(total, abs=1e-9)


# --- discrete ---

def cm(entries, row_prefix, labels):
    e = np.atleast_2d(np.asarray(entries, float))
    return ClassMatrix(e, [f"{row_prefix}{i}" for i in range(e.shape[0])], labels)


def test_discrete_clean_cross_pairs():
    cs = cm([[0.9, 0.1], [0.2, 0.8]], "s", ["A", "B"])
    ct = cm([[0.7, 0.3], [0.1, 0.6]], "t", ["A", "B"])
    r = match_discrete(cs, ct)
    assert sorted(r.pairs) == [("t0", "s0"), ("t1", "s1")]
    assert r.method == "discrete"


def test_discrete_greedy_by_confidence_within_label():
    # two source crops argmax to A; the single target A takes the stronger one
    cs = cm([[0.5, 0.1], [0.9, 0.2]], "s", ["A", "B"])
    ct = cm([[0.8, 0.0]], "t", ["A", "B"])
    r = match_discrete(cs, ct)
    assert sorted(r.pairs) == [("t0", "s1")]
    assert r.unmatched_sources == frozenset({"s0"})


def test_discrete_disjoint_labels_no_pairs():
    cs = cm([[0.9, 0.1]], "s", ["A", "B"])
    ct = cm([[0.1, 0.9]], "t", ["A", "B"])
    r = match_discrete(cs, ct)
    assert not r.pairs
    assert r.unmatched_sources == frozenset({"s0"})
    assert r.unmatched_targets == frozenset({"t0"})


def test_discrete_score_is_row_inner_product():
    cs = cm([[0.9, 0.1]], "s", ["A", "B"])
    ct = cm([[0.7, 0.3]], "t", ["A", "B"])
    r = match_discrete(cs, ct)
    assert r.total_score == pytest.approx(0.9 * 0.7 + 0.1 * 0.3)


def test_discrete_prompt_mismatch():
    with pytest.raises(PromptSetMismatch):
        match_discrete(cm([[1.0]], "s", ["A"]), cm([[1.0]], "t", ["B"]))


def test_discrete_argmax_tie_breaks_to_lowest_column():
    cs = cm([[0.5, 0.5]], "s", ["A", "B"])   # label A by tie rule
    ct = cm([[0.5, 0.5]], "t", ["A", "B"])
    r = match_discrete(cs, ct)
    assert sorted(r.pairs) == [("t0", "s0")]
