import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import best_tree_score, enumerate_trees, valid_tree
from udkit.graph_decode import (
    brute_force_arborescence,
    is_single_rooted_tree,
    max_arborescence,
    tree_score,
)

# number of labelled rooted trees on n+1 nodes with a single root child
# equals n^(n-1) (rooted trees on n nodes) -> 1, 2, 9, 64, 625
TREE_COUNTS = {1: 1, 2: 2, 3: 9, 4: 64, 5: 625}


@pytest.mark.parametrize("n", sorted(TREE_COUNTS))
def test_oracle_enumeration_counts(n):
    assert sum(1 for _ in enumerate_trees(n)) == TREE_COUNTS[n]


def test_greedy_cycle_is_broken():
    # words 1 and 2 prefer each other; the root prefers 1
    s = np.array([[5.0, 1.0], [0.0, 10.0], [10.0, 0.0]])
    assert max_arborescence(s) == [0, 1]


def test_single_root_is_enforced():
    # every word prefers the root
    s = np.array([[10.0, 10.0, 10.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0], [0.0, 3.0, 0.0]])
    heads = max_arborescence(s)
    assert is_single_rooted_tree(heads)
    assert tree_score(s, heads) == pytest.approx(best_tree_score(s))


def test_single_word():
    assert max_arborescence(np.array([[0.3], [0.0]])) == [0]


def test_bad_input():
    with pytest.raises(ValueError):
        max_arborescence(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        max_arborescence(np.array([[np.nan], [0.0]]))
    with pytest.raises(ValueError):
        brute_force_arborescence(np.zeros((9, 8)))


@pytest.mark.parametrize("n", range(2, 7))
def test_matches_enumeration_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        s = rng.normal(size=(n + 1, n))
        heads = max_arborescence(s)
        assert valid_tree(heads)
        assert tree_score(s, heads) == pytest.approx(best_tree_score(s), abs=1e-9)


@pytest.mark.parametrize("n", range(2, 6))
def test_brute_force_agrees_with_oracle(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(50):
        s = rng.normal(size=(n + 1, n))
        assert tree_score(s, brute_force_arborescence(s)) == pytest.approx(best_tree_score(s), abs=1e-9)


def test_integer_ties_still_optimal():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(2, 6))
        s = rng.integers(0, 3, size=(n + 1, n)).astype(float)
        heads = max_arborescence(s)
        assert valid_tree(heads)
        assert tree_score(s, heads) == best_tree_score(s)


@settings(max_examples=300)
@given(st.integers(1, 12).flatmap(lambda n: arrays(np.float64, (n + 1, n), elements=st.floats(-1e3, 1e3))))
def test_output_always_valid(s):
    heads = max_arborescence(s)
    assert valid_tree(heads)
    assert is_single_rooted_tree(heads)


@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n + 1, n), elements=st.floats(-10, 10))), st.floats(-5, 5))
def test_shift_invariance(s, c):
    # adding a constant to every score adds n*c to every tree
    a = tree_score(s, max_arborescence(s))
    b = tree_score(s, max_arborescence(s + c))
    assert a == pytest.approx(b, abs=1e-7)


def test_is_single_rooted_tree():
    assert is_single_rooted_tree([0, 1, 1])
    assert not is_single_rooted_tree([0, 0])
    assert not is_single_rooted_tree([2, 3, 2])
    assert not is_single_rooted_tree([0, 2])
    assert not is_single_rooted_tree([])
