"""Tests for signature grouping, matched-group formation, and match state."""

import itertools

import numpy as np
import pytest

from almatch import (
    EncodedDataset,
    MatchState,
    balancing_factor,
    compute_signatures,
    form_groups,
    match_on_set,
    preview_match,
)
from almatch.errors import DataError, NoAvailableUnits
from almatch.match_engine import group_labels

from oracles import naive_groups


def make_ds(codes, treatment, outcome=None):
    codes = np.asarray(codes)
    if outcome is None:
        outcome = np.arange(len(codes), dtype=float)
    return EncodedDataset.from_arrays(codes, treatment, outcome)


def test_mixed_radix_signature_of_known_unit():
    # cardinalities [2, 3, 2]; first column is the least significant digit
    ds = make_ds([[1, 2, 0], [0, 0, 1]], [1, 0])
    sig = compute_signatures(ds, (0, 1, 2))
    assert sig[0] == 1 + 2 * 2 + 0 * 6 == 5
    assert sig[1] == 0 + 0 + 1 * 6 == 6
    single = compute_signatures(ds, (1,))
    assert single[0] == 2 and single[1] == 0


def test_signature_equality_is_tuple_equality_on_every_subset():
    rng = np.random.default_rng(42)
    codes = rng.integers(0, 3, size=(30, 5))
    ds = make_ds(codes, rng.integers(0, 2, 30))
    for size in range(1, 6):
        for cols in itertools.combinations(range(5), size):
            sig = compute_signatures(ds, cols)
            for a in range(30):
                for b in range(a + 1, 30):
                    tuples_equal = all(codes[a, c] == codes[b, c] for c in cols)
                    assert (sig[a] == sig[b]) == tuples_equal


def test_radix_overflow_falls_back_to_identical_grouping():
    rng = np.random.default_rng(3)
    codes = rng.integers(0, 4, size=(50, 3))
    packed, n_packed = group_labels(codes, np.array([4, 4, 4]))
    # inflated bounds push the radix product past 64 bits; values are unchanged
    fallback, n_fallback = group_labels(codes, np.array([2**30, 2**30, 2**30]))
    assert n_packed == n_fallback
    assert np.array_equal(packed, fallback)


def test_empty_covariate_selection_is_rejected():
    ds = make_ds([[0], [1]], [1, 0])
    with pytest.raises(DataError):
        compute_signatures(ds, ())
    with pytest.raises(DataError):
        form_groups(ds, (), np.arange(2), 0)


def test_groups_form_only_where_both_arms_present():
    ds = make_ds([[0], [0], [1], [1]], [1, 0, 1, 1])
    groups = form_groups(ds, (0,), np.arange(4), iteration=0)
    assert len(groups) == 1
    g = groups[0]
    assert g.signature_values == ((0, 0),)
    assert g.treated_rows.tolist() == [0] and g.control_rows.tolist() == [1]
    assert g.members.tolist() == [0, 1]


def test_single_arm_population_forms_no_groups():
    ds = make_ds([[0], [0], [0]], [1, 1, 1])
    assert form_groups(ds, (0,), np.arange(3), 0) == []


def test_group_formation_matches_naive_tuple_grouping():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n, p = int(rng.integers(5, 40)), int(rng.integers(1, 5))
        codes = rng.integers(0, 3, size=(n, p))
        treat = rng.integers(0, 2, n)
        ds = make_ds(codes, treat)
        eligible = np.sort(rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False))
        for size in range(1, p + 1):
            for cols in itertools.combinations(range(p), size):
                expected = naive_groups(codes, treat, cols, eligible)
                got = form_groups(ds, cols, eligible, 0)
                assert len(got) == len(expected)
                for g in got:
                    key = tuple(code for _, code in g.signature_values)
                    t, c = expected[key]
                    assert g.treated_rows.tolist() == t
                    assert g.control_rows.tolist() == c


def test_groups_listed_in_ascending_signature_order():
    ds = make_ds([[1, 0], [1, 0], [0, 1], [0, 1], [0, 0], [0, 0]], [1, 0, 1, 0, 1, 0])
    groups = form_groups(ds, (0, 1), np.arange(6), 0)
    sigs = [compute_signatures(ds, (0, 1))[g.members[0]] for g in groups]
    assert sigs == sorted(sigs)


def test_balancing_factor_is_the_sum_of_matched_proportions():
    ds = make_ds([[0], [0], [1], [1]], [1, 0, 1, 0])
    groups = form_groups(ds, (0,), np.arange(2), 0)  # only the value-0 pair
    assert balancing_factor(groups, available_treated=2, available_control=2) == 1.0
    assert balancing_factor([], 2, 2) == 0.0
    full = form_groups(ds, (0,), np.arange(4), 0)
    assert balancing_factor(full, 2, 2) == 2.0
    with pytest.raises(NoAvailableUnits):
        balancing_factor(full, 0, 2)


def test_matched_units_leave_the_pool_without_replacement():
    # two exact pairs on column 0 plus one treated unit that only matches later
    ds = make_ds([[0, 0], [0, 0], [1, 0], [1, 0], [0, 1]], [1, 0, 1, 0, 1])
    state = MatchState.new(5, with_replacement=False)
    out0 = match_on_set(state, ds, (0, 1), 0)
    assert out0.matched_treated == 2 and out0.matched_control == 2
    assert state.eligible_positions().tolist() == [4]
    # the same covariate set again: only unit 4 is eligible, no control partner
    with pytest.raises(NoAvailableUnits):
        match_on_set(state, ds, (0, 1), 1)


def test_replaying_the_same_set_adds_nothing_without_replacement():
    # leftovers 2 and 3 have distinct signatures, so the replay forms nothing
    ds = make_ds([[0, 0], [0, 0], [1, 0], [0, 1]], [1, 0, 1, 0])
    state = MatchState.new(4, with_replacement=False)
    match_on_set(state, ds, (0, 1), 0)
    n_groups = len(state.groups)
    matched = state.matched.copy()
    out = match_on_set(state, ds, (0, 1), 1)
    assert len(state.groups) == n_groups and out.n_newly_matched == 0
    assert out.bf == 0.0
    assert np.array_equal(state.matched, matched)


def test_replacement_reuses_units_but_keeps_first_main_group():
    # unit 1 pairs exactly with unit 0; after widening to column 0 only,
    # unit 2 joins them, re-using units 0 and 1
    ds = make_ds([[0, 0], [0, 0], [0, 1]], [1, 0, 1])
    state = MatchState.new(3, with_replacement=True)
    match_on_set(state, ds, (0, 1), 0)
    assert state.matched.tolist() == [True, True, False]
    match_on_set(state, ds, (0,), 1)
    assert state.matched.all()
    in_groups = [set(g.members.tolist()) for g in state.groups]
    assert in_groups == [{0, 1}, {0, 1, 2}]
    assert state.main_group[0] == 0 and state.main_group[1] == 0  # earliest kept
    assert state.main_group[2] == 1
    assert state.first_iteration.tolist() == [0, 0, 1]


def test_without_replacement_group_members_stay_disjoint():
    rng = np.random.default_rng(12)
    for _ in range(10):
        n, p = 30, 3
        ds = make_ds(rng.integers(0, 2, size=(n, p)), rng.integers(0, 2, n))
        state = MatchState.new(n, with_replacement=False)
        for it, cols in enumerate([(0, 1, 2), (0, 1), (0,)]):
            try:
                match_on_set(state, ds, cols, it)
            except NoAvailableUnits:
                break
        seen = set()
        total = 0
        for g in state.groups:
            members = set(g.members.tolist())
            assert seen.isdisjoint(members)
            seen |= members
            total += len(members)
        assert total <= n


def test_preview_agrees_with_commit_and_leaves_state_alone():
    # units 2 and 3 survive the exact pass and only pair once column 1 drops
    ds = make_ds([[0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0]], [1, 0, 1, 0])
    state = MatchState.new(4, with_replacement=False)
    match_on_set(state, ds, (0, 1, 2), 0)
    before = state.matched.copy()
    peek = preview_match(state, ds, (0, 2))
    assert np.array_equal(state.matched, before)
    assert state.eligible_positions().tolist() == [2, 3]
    out = match_on_set(state, ds, (0, 2), 1)
    assert peek.bf == out.bf == 2.0
    assert peek.matched_treated == out.matched_treated == 1
    assert peek.n_newly_matched == out.n_newly_matched == 2
