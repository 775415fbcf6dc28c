"""
Exact combinatorics over collision-free Fock outcomes

Outcomes are weight-k bitstrings of length m, one bit per output mode. All
ranks use a single global order: lexicographic on the bitstring with the
leftmost mode most significant and ``1`` sorting before ``0``, so for m=4, k=2
the outcome 1100 has rank 0 and 0011 has the last rank. This is the order in
which ``itertools.combinations`` emits the occupied-mode sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, List, Optional, Sequence, Tuple

from loguru import logger

from core.config import get_settings
from core.errors import EnumerationTooLarge, InE1, RankOutOfRange


@dataclass(frozen=True)
class FockOutcome:
    """A collision-free measurement record: one 0/1 occupation per mode"""

    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise ValueError("FockOutcome needs at least one mode")
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"FockOutcome bits must be 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @property
    def m(self) -> int:
        return len(self.bits)

    @property
    def k(self) -> int:
        return sum(self.bits)

    @property
    def occupied_modes(self) -> Tuple[int, ...]:
        """0-based indices of the occupied modes, ascending"""
        return tuple(i for i, b in enumerate(self.bits) if b)

    @classmethod
    def from_string(cls, text: str) -> "FockOutcome":
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"Not a bitstring: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_modes(cls, m: int, modes: Iterable[int]) -> "FockOutcome":
        bits = [0] * m
        for i in modes:
            bits[i] = 1
        return cls(tuple(bits))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def binomial(m: int, k: int) -> int:
    """C(m, k) as an exact integer; zero when k > m"""
    if m < 0 or k < 0:
        raise ValueError(f"binomial arguments must be nonnegative, got ({m}, {k})")
    return comb(m, k)


def count_preceding(bits: Sequence[int], k: int) -> int:
    """
    Number of weight-k strings of the same length that sort strictly before ``bits``

    ``bits`` may have any weight; for a weight-k string this is its rank.
    """
    m = len(bits)
    total = 0
    ones = 0
    for i, b in enumerate(bits):
        if b:
            ones += 1
            continue
        # strings agreeing on bits[:i] and carrying a 1 at i sort first
        need = k - ones - 1
        if 0 <= need <= m - i - 1:
            total += comb(m - i - 1, need)
    return total


def subset_rank(s: FockOutcome) -> int:
    """Rank of ``s`` in Ω_m^k, in [0, C(m, k))"""
    return count_preceding(s.bits, s.k)


def subset_unrank(m: int, k: int, r: int) -> FockOutcome:
    """Outcome of rank ``r`` in Ω_m^k"""
    size = binomial(m, k)
    if not 0 <= r < size:
        raise RankOutOfRange(f"rank {r} outside [0, C({m},{k})={size})")
    bits = []
    remaining = k
    for i in range(m):
        if remaining == 0:
            bits.append(0)
            continue
        block = comb(m - i - 1, remaining - 1)
        if r < block:
            bits.append(1)
            remaining -= 1
        else:
            r -= block
            bits.append(0)
    return FockOutcome(tuple(bits))


def enumerate_outcomes(m: int, k: int, cap: Optional[int] = None) -> List[FockOutcome]:
    """All of Ω_m^k in rank order; refuses sets larger than the enumeration cap"""
    if cap is None:
        cap = get_settings().BSBM_ENUM_CAP
    size = binomial(m, k)
    if size > cap:
        raise EnumerationTooLarge(f"C({m},{k}) = {size} exceeds enumeration cap {cap}")
    logger.debug(f"Enumerating {size} outcomes of Ω_{m}^{k}")
    return [FockOutcome.from_modes(m, modes) for modes in combinations(range(m), k)]


def skip_rank(s: FockOutcome) -> int:
    """
    Rank of ``s`` within Ω_m^k with every last-mode-occupied outcome removed

    Args:
        s: outcome whose last mode is empty

    Returns:
        rank in [0, C(m, k) - C(m-1, k-1))
    """
    if s.bits[-1] == 1:
        raise InE1(f"{s} has its last mode occupied")
    return count_preceding(s.bits[:-1], s.k)


def skip_unrank(m: int, k: int, r: int) -> FockOutcome:
    size = binomial(m - 1, k)
    if not 0 <= r < size:
        raise RankOutOfRange(f"skip rank {r} outside [0, {size})")
    prefix = subset_unrank(m - 1, k, r)
    return FockOutcome(prefix.bits + (0,))


def bits_to_int(bits: Sequence[int]) -> int:
    """Big-endian integer value of a bit sequence"""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, n: int) -> Tuple[int, ...]:
    """n-bit big-endian encoding of ``value``"""
    if value < 0 or value >= 1 << n:
        raise ValueError(f"{value} does not fit in {n} bits")
    return tuple((value >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(text: str) -> Tuple[int, ...]:
    text = text.strip()
    if any(c not in "01" for c in text):
        raise ValueError(f"Not a bitstring: {text!r}")
    return tuple(int(c) for c in text)
