"""
Tests for readout maps, towers and lifting
"""

import pytest
import numpy as np
import sys
import os
from unittest.mock import patch
from pydantic import ValidationError

# Add src to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from core.born_machine import BsbmSpec, exact_distribution
from core.combinatorics import FockOutcome, enumerate_outcomes
from core.errors import (
    CodomainTooSmall,
    DimensionMismatch,
    EmptyPreimage,
    EnumerationTooLarge,
    InfeasibleBase,
    SizePreconditionViolated,
)
from core.interferometer import ModeUnitary, haar_unitary
from core.oracles import readout_is_surjective, tower_compatibility_violations
from core.readout import (
    Construction,
    EbsbmSpec,
    InterpReadout,
    LiftMode,
    RankReadout,
    TabulatedReadout,
    build_tower,
    lift,
    pushforward_exact,
    universal_column_model,
)
from core.training import total_variation


@pytest.fixture
def rng():
    """Seeded generator"""
    return np.random.default_rng(31)


@pytest.fixture
def bleed_tower():
    """Bleed tower over 4 bits from the (6,2) base"""
    return build_tower(4, "bleed", base=(6, 2), levels=4)


@pytest.fixture
def interp_tower():
    """Interpolation tower over 4 bits from three photons"""
    return build_tower(4, "interp", photons=3)


class TestRankReadout:
    """Test the injective rank readout"""

    def test_values_are_ranks(self):
        """Test that outcomes read out their rank"""
        readout = RankReadout(4, 2, 3)
        assert [readout.value(s) for s in enumerate_outcomes(4, 2)] == list(range(6))
        assert readout(FockOutcome.from_string("0011")) == (1, 0, 1)

    def test_codomain_too_small(self):
        """Test that C(6,3) = 20 outcomes do not fit in 4 bits"""
        with pytest.raises(CodomainTooSmall):
            RankReadout(6, 3, 4)

    def test_unused_values_have_no_preimage(self):
        """Test preimages past C(m,k)"""
        readout = RankReadout(4, 2, 3)
        assert readout.preimages(7) == []
        assert readout.preimages((0, 1, 0)) == [FockOutcome.from_string("1001")]

    def test_wrong_outcome_shape(self):
        """Test that outcomes of another size are refused"""
        with pytest.raises(DimensionMismatch):
            RankReadout(4, 2, 3).value(FockOutcome.from_string("111"))


class TestInterpReadout:
    """Test the interpolation readout"""

    def test_size_preconditions(self):
        """Test C(m-1,k-1) ≤ 2^n ≤ C(m,k)"""
        with pytest.raises(SizePreconditionViolated):
            InterpReadout(4, 2, 4)
        with pytest.raises(SizePreconditionViolated):
            InterpReadout(9, 5, 4)

    def test_upper_bound_strictness(self):
        """Test that (8,2,3) is allowed modulo 2^n but refused when strict"""
        readout = InterpReadout(8, 2, 3)
        assert not readout.upper_bound_ok
        assert readout_is_surjective(readout)
        with pytest.raises(SizePreconditionViolated):
            InterpReadout(8, 2, 3, strict=True)

    def test_last_mode_outcomes_read_prefix_rank(self):
        """Test that E1 outcomes match the rank readout of their prefix"""
        readout = InterpReadout(6, 3, 4)
        prefix_readout = RankReadout(5, 2, 4)
        for s in enumerate_outcomes(6, 3):
            if s.bits[-1] == 1:
                assert readout.value(s) == prefix_readout.value(FockOutcome(s.bits[:-1]))

    def test_surjective(self):
        """Test that every 4-bit value is hit"""
        assert readout_is_surjective(InterpReadout(6, 3, 4))
        assert readout_is_surjective(InterpReadout(7, 2, 4))

    def test_preimages_partition_outcomes(self):
        """Test that preimages of all values cover Ω exactly once"""
        readout = InterpReadout(6, 3, 4)
        found = [s for y in range(16) for s in readout.preimages(y)]
        assert sorted(map(str, found)) == sorted(map(str, enumerate_outcomes(6, 3)))
        for y in range(16):
            assert all(readout.value(s) == y for s in readout.preimages(y))

    def test_invert_embedded(self):
        """Test the embedded preimage and its absence above C(m-1,k-1)"""
        readout = InterpReadout(6, 3, 4)
        for y in range(10):
            s = readout.invert_embedded(y)
            assert s.bits[-1] == 1
            assert readout.value(s) == y
        assert readout.invert_embedded(10) is None


class TestTabulatedReadout:
    """Test table-driven readouts"""

    def test_lookup(self):
        """Test values follow the rank-ordered table"""
        readout = TabulatedReadout(3, 1, 1, [0, 1, 1])
        assert [readout.value(s) for s in enumerate_outcomes(3, 1)] == [0, 1, 1]
        assert readout.preimages(1) == [FockOutcome.from_string("010"), FockOutcome.from_string("001")]

    def test_table_checks(self):
        """Test wrong lengths and out-of-range values"""
        with pytest.raises(DimensionMismatch):
            TabulatedReadout(3, 1, 1, [0, 1])
        with pytest.raises(DimensionMismatch):
            TabulatedReadout(3, 1, 1, [0, 1, 2])

    def test_constant(self):
        """Test the constant readout is not surjective"""
        assert not readout_is_surjective(TabulatedReadout.constant(3, 1, 2))


class TestLift:
    """Test lifting data back to outcomes"""

    def test_deterministic_lowest_rank(self):
        """Test that the deterministic lift picks the first preimage"""
        readout = InterpReadout(6, 3, 4)
        assert lift(0, LiftMode.DETERMINISTIC, readout) == readout.preimages(0)[0]
        assert lift((0, 0, 0, 0), "deterministic", readout) == readout.preimages(0)[0]

    def test_stochastic_covers_preimages(self):
        """Test that stochastic lifts reach every preimage and nothing else"""
        readout = InterpReadout(6, 3, 4)
        preimages = readout.preimages(0)
        assert len(preimages) == 2
        drawn = {lift(0, LiftMode.STOCHASTIC, readout, rng=seed) for seed in range(200)}
        assert drawn == set(preimages)

    def test_stochastic_is_seeded(self):
        """Test that the same seed gives the same lift"""
        readout = InterpReadout(7, 2, 4)
        assert lift(3, "stochastic", readout, rng=5) == lift(3, "stochastic", readout, rng=5)

    def test_empty_preimage(self):
        """Test that unreachable values cannot be lifted"""
        with pytest.raises(EmptyPreimage):
            lift(7, LiftMode.DETERMINISTIC, RankReadout(4, 2, 3))
        with pytest.raises(EmptyPreimage):
            lift(1, LiftMode.STOCHASTIC, TabulatedReadout.constant(3, 1, 2), rng=0)

    def test_wrong_width(self):
        """Test that data of the wrong width is refused"""
        with pytest.raises(DimensionMismatch):
            lift((0, 1), LiftMode.DETERMINISTIC, RankReadout(4, 2, 3))


class TestEbsbmSpec:
    """Test readout-mapped models"""

    def test_readout_must_match_model(self):
        """Test that the readout reads the model's outcomes"""
        base = BsbmSpec(m=4, k=2, unitary=ModeUnitary.identity(4))
        with pytest.raises(ValidationError):
            EbsbmSpec(n=3, base=base, readout=RankReadout(5, 2, 4))
        with pytest.raises(ValidationError):
            EbsbmSpec(n=4, base=base, readout=RankReadout(4, 2, 3))

    def test_pushforward_sums_preimages(self, rng):
        """Test the pushforward table against a manual sum"""
        base = BsbmSpec(m=6, k=3, unitary=haar_unitary(6, rng))
        readout = InterpReadout(6, 3, 4)
        table = pushforward_exact(EbsbmSpec(n=4, base=base, readout=readout))
        assert table.shape == (16,)
        assert table.sum() == pytest.approx(1.0, abs=1e-12)
        dist = exact_distribution(base)
        for y in (0, 5, 12):
            assert table[y] == pytest.approx(sum(dist.prob(s) for s in readout.preimages(y)), abs=1e-12)


class TestBleedTower:
    """Test the bleed construction"""

    def test_dimensions(self, bleed_tower):
        """Test the level sizes from the (6,2) base"""
        assert bleed_tower.dims == [(6, 2), (7, 2), (9, 3), (11, 4)]
        assert bleed_tower.construction is Construction.BLEED
        assert any("level 3" in line for line in bleed_tower.report)

    def test_automatic_base(self):
        """Test that two photons choose the largest C(m,2) within 16"""
        assert build_tower(4, "bleed", photons=2, levels=2).dims == [(6, 2), (7, 2)]

    def test_infeasible_base(self):
        """Test that a base needing fewer than n-1 bits is refused"""
        with pytest.raises(InfeasibleBase):
            build_tower(4, "bleed", base=(4, 2))

    def test_compatible(self, bleed_tower):
        """Test f_{j+1}(R_j(s)) = f_j(s) on every enumerable level"""
        assert tower_compatibility_violations(bleed_tower) == []

    def test_surjective(self, bleed_tower):
        """Test that every level hits every 4-bit value"""
        for j in range(1, len(bleed_tower) + 1):
            assert readout_is_surjective(bleed_tower.level(j))

    def test_strip_inverts_embed(self, bleed_tower):
        """Test that stripping undoes the outcome embedding"""
        for j in (1, 2, 3):
            m, k = bleed_tower.dims[j - 1]
            for s in enumerate_outcomes(m, k)[:10]:
                assert bleed_tower.strip_outcome(bleed_tower.embed_outcome(s, j), j) == s

    def test_invert_embedded(self, bleed_tower):
        """Test that base values invert to F′_j of the base outcome"""
        top = bleed_tower.level(4)
        base = bleed_tower.level(1)
        for y in range(15):
            s = top.invert_embedded(y)
            assert top.value(s) == y
            assert s == bleed_tower.f_prime(base.preimages(y)[0], 4)
        assert top.invert_embedded(15) is None

    def test_trailing_ones(self, bleed_tower):
        """Test that F′_j appends a zero then j-2 copies of 0…01"""
        x = FockOutcome.from_string("110000")
        assert str(bleed_tower.f_prime(x, 4)) == "110000" + "0" + "01" + "01"

    def test_preimages_match_scan(self, bleed_tower):
        """Test that level preimages equal a scan over every outcome"""
        for j in range(2, len(bleed_tower) + 1):
            readout = bleed_tower.level(j)
            table = {}
            for s in enumerate_outcomes(readout.m, readout.k):
                table.setdefault(readout.value(s), []).append(s)
            for y in range(16):
                assert readout.preimages(y) == table.get(y, [])

    def test_lift_above_enumeration_cap(self):
        """Test lifting into a (9,3) level while C(9,3) exceeds the cap"""
        top = build_tower(4, "bleed", base=(6, 2), levels=3).level(3)
        table = {}
        for s in enumerate_outcomes(9, 3):
            table.setdefault(top.value(s), []).append(s)
        with patch.dict(os.environ, {"BSBM_ENUM_CAP": "50"}):
            with pytest.raises(EnumerationTooLarge):
                enumerate_outcomes(9, 3)
            for y in range(16):
                assert lift(y, LiftMode.DETERMINISTIC, top) == table[y][0]
                assert lift(y, LiftMode.STOCHASTIC, top, rng=y) in table[y]

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_pushforward_preserved(self, bleed_tower, j, rng):
        """Test that ι_j keeps the readout pushforward"""
        m, _ = bleed_tower.dims[j - 1]
        for _ in range(10):
            u = haar_unitary(m, rng)
            lower = pushforward_exact(bleed_tower.level_spec(j, unitary=u))
            upper = pushforward_exact(bleed_tower.level_spec(j + 1, unitary=bleed_tower.embed_unitary(u, j)))
            assert np.max(np.abs(lower - upper)) <= 1e-12

    def test_describe(self, bleed_tower):
        """Test the tabular tower description"""
        assert bleed_tower.describe()[:2] == ["6,2,bleed,rank", "7,2,bleed,bleed"]

    def test_level_bounds(self, bleed_tower):
        """Test that levels are 1-based"""
        with pytest.raises(IndexError):
            bleed_tower.level(0)
        with pytest.raises(IndexError):
            bleed_tower.level(5)


class TestInterpTower:
    """Test the interpolation construction"""

    def test_dimensions(self, interp_tower):
        """Test (6,3), (7,2), (16,1) for n=4"""
        assert interp_tower.dims == [(6, 3), (7, 2), (16, 1)]
        assert interp_tower.report == ()

    def test_surjective(self, interp_tower):
        """Test that every level hits every 4-bit value"""
        for j in range(1, len(interp_tower) + 1):
            assert readout_is_surjective(interp_tower.level(j))

    def test_no_cross_level_embedding(self, interp_tower):
        """Test that interpolation levels cannot be embedded into each other"""
        with pytest.raises(ValueError):
            interp_tower.embed_outcome(FockOutcome.from_string("111000"), 1)

    @pytest.mark.parametrize("j", [1, 2])
    def test_embedded_subsampler(self, interp_tower, j, rng):
        """Test that the last-mode outcomes carry the smaller sampler's rank readout"""
        m, k = interp_tower.dims[j - 1]
        for _ in range(10):
            u = haar_unitary(m - 1, rng)
            small = EbsbmSpec(n=4, base=BsbmSpec(m=m - 1, k=k - 1, unitary=u), readout=RankReadout(m - 1, k - 1, 4))
            level = interp_tower.level_spec(j, unitary=interp_tower.embed_subsampler(u, j))
            assert total_variation(pushforward_exact(level), pushforward_exact(small)) <= 1e-9

    def test_subsampler_checks(self, interp_tower, bleed_tower, rng):
        """Test the embedding's level and size checks"""
        with pytest.raises(DimensionMismatch):
            interp_tower.embed_subsampler(haar_unitary(15, rng), 3)
        with pytest.raises(DimensionMismatch):
            interp_tower.embed_subsampler(haar_unitary(4, rng), 1)
        with pytest.raises(ValueError):
            bleed_tower.embed_subsampler(haar_unitary(5, rng), 1)

    def test_strict_upper_bound(self):
        """Test that (8,2) over 3 bits is reported, or refused when strict"""
        tower = build_tower(3, "interp", base=(8, 2))
        assert any("level 1" in line for line in tower.report)
        with pytest.raises(InfeasibleBase):
            build_tower(3, "interp", base=(8, 2), strict=True)


class TestUniversality:
    """Test that one photon over 2^n modes reaches any distribution"""

    def test_random_targets(self, interp_tower, rng):
        """Test 20 Dirichlet targets are reproduced exactly at the top level"""
        top = interp_tower.level(3)
        for _ in range(20):
            target = rng.dirichlet(np.ones(16))
            table = pushforward_exact(universal_column_model(top, target))
            assert total_variation(table, target) <= 1e-9

    def test_point_mass(self, interp_tower):
        """Test a target concentrated on one value"""
        target = np.zeros(16)
        target[9] = 1.0
        table = pushforward_exact(universal_column_model(interp_tower.level(3), target))
        assert table[9] == pytest.approx(1.0, abs=1e-12)

    def test_requires_single_photon_level(self, interp_tower):
        """Test that multi-photon levels are refused"""
        with pytest.raises(DimensionMismatch):
            universal_column_model(interp_tower.level(1), np.full(16, 1 / 16))
