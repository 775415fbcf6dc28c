"""
Tests for outcome-space combinatorics
"""

import pytest
import sys
import os
from itertools import combinations
from math import comb

# Add src to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from core.combinatorics import (
    FockOutcome,
    binomial,
    bits_to_int,
    count_preceding,
    enumerate_outcomes,
    int_to_bits,
    skip_rank,
    skip_unrank,
    subset_rank,
    subset_unrank,
)
from core.errors import EnumerationTooLarge, InE1, RankOutOfRange


def _o(text):
    return FockOutcome.from_string(text)


class TestFockOutcome:
    """Test the outcome record"""

    def test_properties(self):
        """Test m, k and occupied modes"""
        s = _o("01101")
        assert s.m == 5
        assert s.k == 3
        assert s.occupied_modes == (1, 2, 4)
        assert str(s) == "01101"

    def test_from_modes(self):
        """Test building an outcome from occupied modes"""
        assert FockOutcome.from_modes(4, [0, 3]) == _o("1001")

    def test_rejects_non_bits(self):
        """Test that occupations other than 0/1 are rejected"""
        with pytest.raises(ValueError):
            FockOutcome((0, 2, 1))
        with pytest.raises(ValueError):
            FockOutcome.from_string("01a")


class TestBinomial:
    """Test exact binomial coefficients"""

    def test_small_values(self):
        """Test definitional values"""
        assert binomial(4, 2) == 6
        assert binomial(7, 0) == 1
        assert binomial(3, 5) == 0

    def test_against_pascal_triangle(self):
        """Test C(30, 15) against a Pascal triangle"""
        row = [1]
        for _ in range(30):
            row = [1] + [a + b for a, b in zip(row, row[1:])] + [1]
        assert binomial(30, 15) == row[15] == 155117520

    def test_exact_for_large_arguments(self):
        """Test exact integers beyond 64 bits"""
        assert binomial(64, 32) == 1832624140942590534
        assert binomial(200, 100) == comb(200, 100)


class TestSubsetRank:
    """Test lexicographic ranking"""

    def test_single_photon_order(self):
        """Test that 100, 010, 001 rank 0, 1, 2"""
        assert [subset_rank(_o(t)) for t in ("100", "010", "001")] == [0, 1, 2]

    def test_leading_ones_rank_first(self):
        """Test that 1100 ranks first and 0011 last for m=4, k=2"""
        assert subset_rank(_o("1100")) == 0
        assert subset_rank(_o("0011")) == 5

    def test_bijective_on_six_choose_three(self):
        """Test that all 20 outcomes of (6,3) rank to a permutation of 0..19"""
        ranks = sorted(subset_rank(FockOutcome.from_modes(6, c)) for c in combinations(range(6), 3))
        assert ranks == list(range(20))

    def test_rank_follows_descending_string_order(self):
        """Test the global order against sorting the strings"""
        outcomes = [FockOutcome.from_modes(7, c) for c in combinations(range(7), 3)]
        by_string = sorted(outcomes, key=lambda s: str(s), reverse=True)
        assert [subset_rank(s) for s in by_string] == list(range(len(outcomes)))


class TestSubsetUnrank:
    """Test unranking"""

    def test_first_rank(self):
        """Test (3,1,0) -> 100"""
        assert subset_unrank(3, 1, 0) == _o("100")

    def test_round_trip(self):
        """Test rank(unrank(r)) == r over all of (8,3)"""
        for r in range(binomial(8, 3)):
            assert subset_rank(subset_unrank(8, 3, r)) == r

    def test_out_of_range(self):
        """Test that rank C(4,2) is rejected"""
        with pytest.raises(RankOutOfRange):
            subset_unrank(4, 2, 6)
        with pytest.raises(RankOutOfRange):
            subset_unrank(4, 2, -1)


class TestEnumerateOutcomes:
    """Test enumeration in rank order"""

    def test_single_photon(self):
        """Test (3,1) enumeration"""
        assert [str(s) for s in enumerate_outcomes(3, 1)] == ["100", "010", "001"]

    def test_distinct_and_weighted(self):
        """Test (4,2) gives six distinct weight-2 outcomes"""
        outcomes = enumerate_outcomes(4, 2)
        assert len(outcomes) == 6
        assert len(set(outcomes)) == 6
        assert all(s.k == 2 for s in outcomes)

    def test_rank_order(self):
        """Test that enumeration order is rank order"""
        assert [subset_rank(s) for s in enumerate_outcomes(9, 4)] == list(range(binomial(9, 4)))

    def test_cap(self):
        """Test that huge spaces are refused"""
        with pytest.raises(EnumerationTooLarge):
            enumerate_outcomes(40, 20)
        with pytest.raises(EnumerationTooLarge):
            enumerate_outcomes(6, 3, cap=19)


class TestCountPreceding:
    """Test counting weight-k strings before an arbitrary string"""

    def test_matches_rank_for_weight_k(self):
        """Test that the count is the rank on weight-k strings"""
        for s in enumerate_outcomes(6, 2):
            assert count_preceding(s.bits, 2) == subset_rank(s)

    def test_arbitrary_weight(self):
        """Test against brute force for strings of any weight"""
        pool = enumerate_outcomes(6, 3)
        for value in range(1 << 6):
            bits = int_to_bits(value, 6)
            expected = sum(1 for s in pool if str(s) > "".join(map(str, bits)))
            assert count_preceding(bits, 3) == expected


class TestSkipRank:
    """Test the rank that skips outcomes with the last mode occupied"""

    def test_single_photon(self):
        """Test (3,1): 100 -> 0, 010 -> 1"""
        assert skip_rank(_o("100")) == 0
        assert skip_rank(_o("010")) == 1

    def test_last_mode_occupied(self):
        """Test that 0...01 is rejected"""
        with pytest.raises(InE1):
            skip_rank(_o("0001"))

    def test_bijective_on_compacted_order(self):
        """Test (6,3): skip rank is the index after filtering E1 out of the enumeration"""
        kept = [s for s in enumerate_outcomes(6, 3) if s.bits[-1] == 0]
        assert [skip_rank(s) for s in kept] == list(range(binomial(6, 3) - binomial(5, 2)))
        for i, s in enumerate(kept):
            assert skip_unrank(6, 3, i) == s

    def test_skip_unrank_range(self):
        """Test skip ranks past the compacted size are rejected"""
        with pytest.raises(RankOutOfRange):
            skip_unrank(3, 1, 2)


class TestBitHelpers:
    """Test big-endian bit conversions"""

    def test_int_bits(self):
        """Test int_to_bits and bits_to_int agree"""
        assert int_to_bits(6, 4) == (0, 1, 1, 0)
        assert bits_to_int((0, 1, 1, 0)) == 6

    def test_int_too_large(self):
        """Test values that do not fit are rejected"""
        with pytest.raises(ValueError):
            int_to_bits(16, 4)
