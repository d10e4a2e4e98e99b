from itertools import product
from math import comb

import pytest
from hypothesis import given, strategies as st

from belllab.simplex import (
    LatticeDistribution,
    as_lattice,
    count_configurations,
    enumerate_configurations,
    enumerate_range,
    rank,
    unrank,
)
from fractions import Fraction


def brute_force_points(n_values, denominator):
    """All numerator vectors summing to the denominator, reverse-lex order."""
    pts = [p for p in product(range(denominator + 1), repeat=n_values) if sum(p) == denominator]
    return sorted(pts, reverse=True)


@pytest.mark.parametrize("n_values, denominator, expected", [(3, 2, 6), (1, 5, 1), (2, 2, 3)])
def test_count_examples(n_values, denominator, expected):
    assert count_configurations(n_values, denominator) == expected
    assert len(brute_force_points(n_values, denominator)) == expected


@pytest.mark.parametrize("n_values, denominator", [(0, 2), (2, 0), (0, 0)])
def test_count_rejects_degenerate(n_values, denominator):
    with pytest.raises(ValueError):
        count_configurations(n_values, denominator)


def test_count_is_exact_big_integer():
    v = count_configurations(200, 10_000)
    assert v == comb(10_199, 199)
    assert v > 2**600


@pytest.mark.parametrize(
    "n_values, denominator, expected",
    [
        (2, 1, [(1, 0), (0, 1)]),
        (1, 3, [(3,)]),
        (3, 1, [(1, 0, 0), (0, 1, 0), (0, 0, 1)]),
    ],
)
def test_enumerate_examples(n_values, denominator, expected):
    assert [d.numerators for d in enumerate_configurations(n_values, denominator)] == expected


@pytest.mark.parametrize("n_values", range(1, 6))
@pytest.mark.parametrize("denominator", range(1, 6))
def test_enumeration_matches_brute_force(n_values, denominator):
    got = [d.numerators for d in enumerate_configurations(n_values, denominator)]
    assert got == brute_force_points(n_values, denominator)


def test_enumerate_is_lazy():
    it = enumerate_configurations(50, 1000)
    first = next(it)
    assert first.numerators[0] == 1000


def test_rank_examples():
    assert rank(LatticeDistribution((0, 2), 2)) == 2
    assert unrank(2, 2, 1) == LatticeDistribution((1, 1), 2)
    assert rank(next(enumerate_configurations(4, 3))) == 0


def test_unrank_range_checked():
    with pytest.raises(ValueError):
        unrank(2, 2, 3)
    with pytest.raises(ValueError):
        unrank(2, 2, -1)


@pytest.mark.parametrize("n_values, denominator", [(1, 4), (3, 4), (4, 3), (5, 2)])
def test_rank_is_enumeration_position(n_values, denominator):
    for r, d in enumerate(enumerate_configurations(n_values, denominator)):
        assert rank(d) == r
        assert unrank(n_values, denominator, r) == d


@given(st.integers(1, 8), st.integers(1, 40), st.data())
def test_unrank_rank_roundtrip(n_values, denominator, data):
    v = count_configurations(n_values, denominator)
    r = data.draw(st.integers(0, v - 1))
    d = unrank(n_values, denominator, r)
    assert sum(d.numerators) == denominator
    assert rank(d) == r


@given(st.integers(2, 30), st.integers(2, 30))
def test_pascal_recurrence(n_values, denominator):
    assert count_configurations(n_values, denominator) == count_configurations(
        n_values - 1, denominator
    ) + count_configurations(n_values, denominator - 1)


def test_enumerate_range_partitions():
    full = list(enumerate_configurations(4, 5))
    parts = []
    for start in range(0, len(full), 7):
        parts.extend(enumerate_range(4, 5, start, start + 7))
    assert parts == full


def test_lattice_distribution_invariants():
    d = LatticeDistribution((1, 2, 1), 4)
    assert d.probabilities() == (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4))
    with pytest.raises(ValueError):
        LatticeDistribution((1, 2), 4)
    with pytest.raises(ValueError):
        LatticeDistribution((-1, 5), 4)
    with pytest.raises(ValueError):
        LatticeDistribution((), 4)


def test_as_lattice():
    assert as_lattice([Fraction(1, 3), Fraction(2, 3)], 6).numerators == (2, 4)
    with pytest.raises(ValueError):
        as_lattice([Fraction(1, 3), Fraction(2, 3)], 4)
