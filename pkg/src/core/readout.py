"""
Readout maps and readout-mapped models

A readout map compresses collision-free outcomes of an (m, k) sampler to
n-bit strings; the extended model's distribution is the pushforward of the
bare one. Two families of maps are built here:

* bleed towers, where each level embeds the previous sampler and parks one
  extra photon in a fresh bleed mode, with readouts compatible across levels;
* interpolation towers, where the photon number drops by one per level down
  to a single photon in 2^n modes.

Readout values are handled as integers in [0, 2^n); ``__call__`` returns the
n-bit big-endian tuple.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from core.born_machine import BsbmSpec, exact_distribution
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
from core.errors import (
    CodomainTooSmall,
    DimensionMismatch,
    EmptyPreimage,
    InfeasibleBase,
    SizePreconditionViolated,
)
from core.interferometer import InterferometerMesh, ModeUnitary, bleed_embed, complete_unitary, pad_embed

BitsLike = Union[int, Sequence[int]]


class Construction(str, Enum):
    BLEED = "bleed"
    INTERP = "interp"


class LiftMode(str, Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


def _as_value(y: BitsLike, n: int) -> int:
    if isinstance(y, (int, np.integer)):
        value = int(y)
    else:
        if len(y) != n:
            raise DimensionMismatch(f"expected {n} readout bits, got {len(y)}")
        value = bits_to_int(y)
    if not 0 <= value < 1 << n:
        raise DimensionMismatch(f"readout value {value} does not fit in {n} bits")
    return value


class ReadoutMap(ABC):
    """A total function Ω_m^k → {0,1}^n"""

    kind = "abstract"

    def __init__(self, m: int, k: int, n: int):
        if not m >= k >= 0 or n < 1:
            raise DimensionMismatch(f"invalid readout dimensions m={m}, k={k}, n={n}")
        self.m = m
        self.k = k
        self.n = n

    def _check(self, s: FockOutcome):
        if s.m != self.m or s.k != self.k:
            raise DimensionMismatch(f"{self.describe()} cannot read a ({s.m},{s.k}) outcome")

    @abstractmethod
    def value(self, s: FockOutcome) -> int:
        """Readout as an integer in [0, 2^n)"""

    def __call__(self, s: FockOutcome) -> Tuple[int, ...]:
        return int_to_bits(self.value(s), self.n)

    @cached_property
    def _preimage_table(self) -> Dict[int, List[FockOutcome]]:
        table: Dict[int, List[FockOutcome]] = {}
        for s in enumerate_outcomes(self.m, self.k):
            table.setdefault(self.value(s), []).append(s)
        return table

    def preimages(self, y: BitsLike) -> List[FockOutcome]:
        """Every outcome reading out to ``y``, in rank order"""
        return list(self._preimage_table.get(_as_value(y, self.n), []))

    def invert_embedded(self, y: BitsLike) -> Optional[FockOutcome]:
        """The preimage of ``y`` inside the embedded smaller sampler, or None if ``y`` is not in that image"""
        return None

    def describe(self) -> str:
        return f"{self.kind}(m={self.m},k={self.k},n={self.n})"

    def __repr__(self) -> str:
        return self.describe()


class RankReadout(ReadoutMap):
    """n-bit binary of the outcome's rank; injective"""

    kind = "rank"

    def __init__(self, m: int, k: int, n: int):
        super().__init__(m, k, n)
        size = binomial(m, k)
        if size > 1 << n:
            raise CodomainTooSmall(f"C({m},{k}) = {size} outcomes do not fit in {n} bits")

    def value(self, s: FockOutcome) -> int:
        self._check(s)
        return subset_rank(s)

    def preimages(self, y: BitsLike) -> List[FockOutcome]:
        v = _as_value(y, self.n)
        return [subset_unrank(self.m, self.k, v)] if v < binomial(self.m, self.k) else []

    def invert_embedded(self, y: BitsLike) -> Optional[FockOutcome]:
        found = self.preimages(y)
        return found[0] if found else None


class InterpReadout(ReadoutMap):
    """
    Readout of one interpolation level

    Outcomes with the last mode occupied read out the rank of their (m-1)-mode
    prefix. The rest read out C(m-1, k-1) + skip rank, reduced mod 2^n; while
    C(m, k) <= 2^{n+1} that is the same as dropping the top bit of the
    (n+1)-bit encoding.
    """

    kind = "interp"

    def __init__(self, m: int, k: int, n: int, strict: bool = False):
        super().__init__(m, k, n)
        if k < 1:
            raise SizePreconditionViolated("interpolation readout needs at least one photon")
        self.embedded_size = binomial(m - 1, k - 1)
        size = binomial(m, k)
        if not self.embedded_size <= 1 << n <= size:
            raise SizePreconditionViolated(
                f"need C({m - 1},{k - 1})={self.embedded_size} <= 2^{n} <= C({m},{k})={size}"
            )
        self.upper_bound_ok = size <= 1 << (n + 1)
        if not self.upper_bound_ok:
            if strict:
                raise SizePreconditionViolated(f"C({m},{k})={size} exceeds 2^{n + 1}")
            logger.warning(f"C({m},{k})={size} exceeds 2^{n + 1}; readout reduces modulo 2^{n}")

    def value(self, s: FockOutcome) -> int:
        self._check(s)
        if s.bits[-1] == 1:
            return count_preceding(s.bits[:-1], self.k - 1)
        return (self.embedded_size + skip_rank(s)) % (1 << self.n)

    def preimages(self, y: BitsLike) -> List[FockOutcome]:
        v = _as_value(y, self.n)
        found = []
        if v < self.embedded_size:
            found.append(self.invert_embedded(v))
        size = binomial(self.m, self.k)
        u = v
        while u < size:
            if u >= self.embedded_size:
                found.append(skip_unrank(self.m, self.k, u - self.embedded_size))
            u += 1 << self.n
        return sorted(found, key=subset_rank)

    def invert_embedded(self, y: BitsLike) -> Optional[FockOutcome]:
        v = _as_value(y, self.n)
        if v >= self.embedded_size:
            return None
        prefix = subset_unrank(self.m - 1, self.k - 1, v)
        return FockOutcome(prefix.bits + (1,))


class BleedLevel(ReadoutMap):
    """
    Readout f_j of level j of a bleed tower

    ``dims`` lists (m_i, k_i) for levels 1..j. Level 1 reads out the rank.
    Outcomes in the image of the previous level's embedding read out what
    their preimage reads out one level down; every other outcome reads out
    C(m_1, k_1) plus its rank among the non-embedded outcomes, mod 2^n.
    """

    kind = "bleed"

    def __init__(self, dims: Sequence[Tuple[int, int]], n: int):
        dims = [tuple(d) for d in dims]
        m, k = dims[-1]
        super().__init__(m, k, n)
        self.dims = dims
        self.level = len(dims)
        self.base_size = binomial(*dims[0])
        if self.base_size > 1 << n:
            raise CodomainTooSmall(f"base C{dims[0]} = {self.base_size} does not fit in {n} bits")

    def suffix(self, level: int) -> Tuple[int, ...]:
        """Bits appended by the embedding from ``level`` to ``level + 1`` (1-based)"""
        m_lo, m_hi = self.dims[level - 1][0], self.dims[level][0]
        if level == 1:
            return (0,) * (m_hi - m_lo)
        return (0,) * (m_hi - m_lo - 1) + (1,)

    def _is_embedded(self, bits: Tuple[int, ...], level: int) -> bool:
        return bits[self.dims[level - 2][0]:] == self.suffix(level - 1)

    def _embedded_before(self, bits: Tuple[int, ...], level: int) -> int:
        """Outcomes of the embedded image at ``level`` strictly before ``bits`` in rank order"""
        m_lo, k_lo = self.dims[level - 2]
        head, tail = bits[:m_lo], bits[m_lo:]
        before = count_preceding(head, k_lo)
        if sum(head) == k_lo and bits_to_int(self.suffix(level - 1)) > bits_to_int(tail):
            before += 1
        return before

    def _value_at(self, bits: Tuple[int, ...], level: int) -> int:
        if level == 1:
            return count_preceding(bits, self.dims[0][1])
        if self._is_embedded(bits, level):
            return self._value_at(bits[: self.dims[level - 2][0]], level - 1)
        # rank among outcomes outside the embedded image
        rank = count_preceding(bits, self.dims[level - 1][1]) - self._embedded_before(bits, level)
        return (self.base_size + rank) % (1 << self.n)

    def _fresh_unrank(self, r: int, level: int) -> Tuple[int, ...]:
        """The r-th outcome at ``level`` outside the embedded image"""
        m, k = self.dims[level - 1]
        lo, hi = 0, binomial(m, k) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            bits = subset_unrank(m, k, mid).bits
            fresh_through = mid + 1 - self._embedded_before(bits, level) - int(self._is_embedded(bits, level))
            if fresh_through > r:
                hi = mid
            else:
                lo = mid + 1
        return subset_unrank(m, k, lo).bits

    def _preimages_at(self, v: int, level: int) -> List[Tuple[int, ...]]:
        if level == 1:
            return [subset_unrank(*self.dims[0], v).bits] if v < self.base_size else []
        suffix = self.suffix(level - 1)
        found = [head + suffix for head in self._preimages_at(v, level - 1)]
        fresh = binomial(*self.dims[level - 1]) - binomial(*self.dims[level - 2])
        r = (v - self.base_size) % (1 << self.n)
        while r < fresh:
            found.append(self._fresh_unrank(r, level))
            r += 1 << self.n
        return found

    def value(self, s: FockOutcome) -> int:
        self._check(s)
        return self._value_at(s.bits, self.level)

    def preimages(self, y: BitsLike) -> List[FockOutcome]:
        found = [FockOutcome(bits) for bits in self._preimages_at(_as_value(y, self.n), self.level)]
        return sorted(found, key=subset_rank)

    def embed_base(self, x: FockOutcome) -> FockOutcome:
        """F′_j: carry a level-1 outcome up to this level"""
        bits = x.bits
        for level in range(1, self.level):
            bits = bits + self.suffix(level)
        return FockOutcome(bits)

    def invert_embedded(self, y: BitsLike) -> Optional[FockOutcome]:
        v = _as_value(y, self.n)
        if v >= self.base_size:
            return None
        return self.embed_base(subset_unrank(*self.dims[0], v))

    def describe(self) -> str:
        return f"bleed(level={self.level},m={self.m},k={self.k},n={self.n})"


class TabulatedReadout(ReadoutMap):
    """Arbitrary readout given as one value per outcome, in rank order"""

    kind = "table"

    def __init__(self, m: int, k: int, n: int, values: Sequence[int]):
        super().__init__(m, k, n)
        values = [int(v) for v in values]
        if len(values) != binomial(m, k):
            raise DimensionMismatch(f"need {binomial(m, k)} table entries, got {len(values)}")
        if any(not 0 <= v < 1 << n for v in values):
            raise DimensionMismatch(f"table values must fit in {n} bits")
        self.values = tuple(values)

    @classmethod
    def constant(cls, m: int, k: int, n: int, value: int = 0) -> "TabulatedReadout":
        return cls(m, k, n, [value] * binomial(m, k))

    def value(self, s: FockOutcome) -> int:
        self._check(s)
        return self.values[subset_rank(s)]


class EbsbmSpec(BaseModel):
    """A bare model together with the readout applied to its outcomes"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int
    base: BsbmSpec
    readout: ReadoutMap

    @model_validator(mode="after")
    def _check_readout(self):
        r = self.readout
        if (r.m, r.k) != (self.base.m, self.base.k):
            raise DimensionMismatch(f"readout reads ({r.m},{r.k}) outcomes, model produces ({self.base.m},{self.base.k})")
        if r.n != self.n:
            raise DimensionMismatch(f"readout emits {r.n} bits, model declares n={self.n}")
        return self

    def with_mesh(self, mesh: InterferometerMesh) -> "EbsbmSpec":
        return self.model_copy(update={"base": self.base.with_mesh(mesh)})


def pushforward_exact(spec: EbsbmSpec) -> np.ndarray:
    """Probability table over {0,1}^n, indexed by the big-endian value"""
    dist = exact_distribution(spec.base)
    table = np.zeros(1 << spec.n)
    values = np.array([spec.readout.value(s) for s in dist.outcomes], dtype=int)
    np.add.at(table, values, dist.probs)
    return table


def lift(
    y: BitsLike,
    mode: Union[LiftMode, str],
    readout: ReadoutMap,
    rng: Union[None, int, np.random.Generator] = None,
) -> FockOutcome:
    """
    Map an n-bit data point back to an outcome of the bare model

    Deterministic lifts pick the lowest-rank preimage; stochastic lifts draw a
    preimage uniformly.
    """
    found = readout.preimages(y)
    if not found:
        raise EmptyPreimage(f"{readout.describe()} has no preimage for {y}")
    if LiftMode(mode) is LiftMode.DETERMINISTIC:
        return found[0]
    return found[int(np.random.default_rng(rng).integers(len(found)))]


@dataclass(frozen=True)
class ReadoutTower:
    """Levels of readout-mapped samplers sharing one output width n"""

    n: int
    construction: Construction
    readouts: Tuple[ReadoutMap, ...]
    report: Tuple[str, ...] = field(default=())

    @property
    def dims(self) -> List[Tuple[int, int]]:
        return [(r.m, r.k) for r in self.readouts]

    def __len__(self) -> int:
        return len(self.readouts)

    def level(self, j: int) -> ReadoutMap:
        """Readout of level j (1-based)"""
        if not 1 <= j <= len(self.readouts):
            raise IndexError(f"tower has levels 1..{len(self.readouts)}, asked for {j}")
        return self.readouts[j - 1]

    def _require_bleed(self):
        if self.construction is not Construction.BLEED:
            raise ValueError("interpolation towers have no embedding between levels")

    def embed_outcome(self, s: FockOutcome, j: int) -> FockOutcome:
        """R_j: level-j outcome to level j+1"""
        self._require_bleed()
        if (s.m, s.k) != self.dims[j - 1] or j >= len(self.readouts):
            raise DimensionMismatch(f"{s} is not a level-{j} outcome with a level above it")
        return FockOutcome(s.bits + self.level(j + 1).suffix(j))

    def strip_outcome(self, s: FockOutcome, j: int) -> FockOutcome:
        """Left inverse of R_j"""
        self._require_bleed()
        m_lo = self.dims[j - 1][0]
        if (s.m, s.k) != self.dims[j] or s.bits[m_lo:] != self.level(j + 1).suffix(j):
            raise DimensionMismatch(f"{s} is not in the image of the level-{j} embedding")
        return FockOutcome(s.bits[:m_lo])

    def f_prime(self, x: FockOutcome, j: int) -> FockOutcome:
        """F′_j = R_{j-1} ∘ … ∘ R_1 applied to a level-1 outcome"""
        for level in range(1, j):
            x = self.embed_outcome(x, level)
        return x

    def embed_unitary(self, unitary: ModeUnitary, j: int) -> ModeUnitary:
        """ι_j: the level-j interferometer inside the level-(j+1) one"""
        self._require_bleed()
        m_hi, k_hi = self.dims[j]
        if j == 1:
            return pad_embed(unitary, m_hi)
        return bleed_embed(unitary, m_hi, k_hi)

    def embed_subsampler(self, unitary: ModeUnitary, j: int) -> ModeUnitary:
        """Interpolation level j: an (m_j - 1, k_j - 1) sampler with one photon rerouted to the last mode"""
        if self.construction is not Construction.INTERP:
            raise ValueError("only interpolation levels embed a smaller sampler")
        m, k = (self.level(j).m, self.level(j).k)
        if k < 2 or unitary.m != m - 1:
            raise DimensionMismatch(f"level {j} ({m},{k}) embeds an {m - 1}-mode sampler with at least one photon")
        return bleed_embed(unitary, m, k)

    def level_spec(
        self,
        j: int,
        mesh: Optional[InterferometerMesh] = None,
        unitary: Optional[ModeUnitary] = None,
    ) -> EbsbmSpec:
        readout = self.level(j)
        base = BsbmSpec(m=readout.m, k=readout.k, mesh=mesh, unitary=unitary)
        return EbsbmSpec(n=self.n, base=base, readout=readout)

    def describe(self) -> List[str]:
        return [f"{m},{k},{self.construction.value},{r.kind}" for (m, k), r in zip(self.dims, self.readouts)]


def _minimal_modes(k: int, floor: int, target: int) -> int:
    m = max(k, floor)
    while binomial(m, k) < target:
        m += 1
    return m


def _largest_modes_within(k: int, limit: int) -> int:
    m = k
    while binomial(m + 1, k) <= limit:
        m += 1
    return m


def _build_bleed(n: int, base: Optional[Tuple[int, int]], photons: int, levels: int) -> ReadoutTower:
    target = 1 << n
    if base is None:
        base = (_largest_modes_within(photons, target), photons)
    m1, k1 = base
    if not m1 >= k1 >= 1:
        raise InfeasibleBase(f"base ({m1},{k1}) needs m >= k >= 1")
    size = binomial(m1, k1)
    if not target // 2 < size <= target:
        raise InfeasibleBase(f"bleed base needs 2^{n - 1} < C({m1},{k1}) <= 2^{n}, got {size}")

    dims = [(m1, k1)]
    if levels >= 2:
        dims.append((_minimal_modes(k1, m1 + 1, target), k1))
    while len(dims) < levels:
        m, k = dims[-1]
        # one working mode and one bleed mode per photon added
        dims.append((m + 2, k + 1))

    report = []
    for j, (m, k) in enumerate(dims[1:], start=2):
        size = binomial(m, k)
        if size < target:
            raise InfeasibleBase(f"level {j} ({m},{k}) has C={size} < 2^{n}")
        if size > 2 * target:
            report.append(f"level {j}: C({m},{k})={size} exceeds 2^{n + 1}")
    readouts = tuple([RankReadout(m1, k1, n)] + [BleedLevel(dims[:j], n) for j in range(2, len(dims) + 1)])
    return ReadoutTower(n=n, construction=Construction.BLEED, readouts=readouts, report=tuple(report))


def _build_interp(n: int, base: Optional[Tuple[int, int]], photons: int, strict: bool) -> ReadoutTower:
    target = 1 << n
    if base is None:
        base = (_minimal_modes(photons, photons, target), photons)
    m1, k1 = base
    if not m1 >= k1 >= 1:
        raise InfeasibleBase(f"base ({m1},{k1}) needs m >= k >= 1")
    if binomial(m1, k1) < target or binomial(m1 - 1, k1 - 1) > target:
        raise InfeasibleBase(
            f"interpolation base needs C({m1 - 1},{k1 - 1}) <= 2^{n} <= C({m1},{k1})"
        )

    dims = [(m1, k1)]
    for k in range(k1 - 1, 0, -1):
        dims.append((_minimal_modes(k, 1, target), k))

    report = []
    readouts = []
    for j, (m, k) in enumerate(dims, start=1):
        if binomial(m, k) > 2 * target:
            if strict:
                raise InfeasibleBase(f"level {j}: C({m},{k}) exceeds 2^{n + 1}")
            report.append(f"level {j}: C({m},{k})={binomial(m, k)} exceeds 2^{n + 1}")
        readouts.append(InterpReadout(m, k, n))
    return ReadoutTower(n=n, construction=Construction.INTERP, readouts=tuple(readouts), report=tuple(report))


def build_tower(
    n: int,
    construction: Union[Construction, str],
    base: Optional[Tuple[int, int]] = None,
    photons: int = 2,
    levels: int = 4,
    strict: bool = False,
) -> ReadoutTower:
    """
    Build a readout tower over n output bits

    Args:
        n: output bit-width
        construction: "bleed" or "interp"
        base: level-1 (m, k); chosen automatically from ``photons`` when omitted
        photons: level-1 photon count for the automatic base
        levels: number of levels of a bleed tower (interpolation towers end at k=1)
        strict: fail instead of reporting when C(m_j, k_j) exceeds 2^{n+1}

    Returns:
        the tower; upper-bound violations are listed in ``report``
    """
    construction = Construction(construction)
    if n < 1:
        raise InfeasibleBase(f"n must be positive, got {n}")
    if construction is Construction.BLEED:
        tower = _build_bleed(n, base, photons, max(1, levels))
    else:
        tower = _build_interp(n, base, photons, strict)
    for line in tower.report:
        logger.warning(f"Tower size bound: {line}")
    logger.info(f"Built {construction.value} tower for n={n}: levels {tower.dims}")
    return tower


def universal_column_model(readout: ReadoutMap, target: np.ndarray) -> EbsbmSpec:
    """
    Single-photon model whose pushforward equals ``target``

    The readout must be a bijection from single-photon outcomes onto {0,1}^n;
    the first column of the unitary carries √target in readout order.
    """
    target = np.asarray(target, dtype=float)
    if readout.k != 1 or readout.m != 1 << readout.n:
        raise DimensionMismatch(f"{readout.describe()} is not a single-photon level over 2^n modes")
    if target.shape != (1 << readout.n,) or np.any(target < 0) or abs(target.sum() - 1.0) > 1e-9:
        raise ValueError("target must be a probability table over {0,1}^n")
    column = np.zeros(readout.m, dtype=complex)
    for y in range(1 << readout.n):
        found = readout.preimages(y)
        if len(found) != 1:
            raise DimensionMismatch(f"{readout.describe()} is not bijective at {y}")
        column[found[0].occupied_modes[0]] = np.sqrt(target[y])
    column /= np.linalg.norm(column)
    base = BsbmSpec(m=readout.m, k=1, unitary=complete_unitary(column))
    return EbsbmSpec(n=readout.n, base=base, readout=readout)
