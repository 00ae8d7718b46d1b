"""Pirate strategies under the marking assumption.

On a column where every colluder holds the same bit the forgery carries that
bit.  On mixed columns the strategy decides.  Every random choice at position
``i`` uses the ``i``-th uniform of the attack stream of ``seed``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import rng
from .codec import Codebook
from .errors import DomainError


class Strategy(str, enum.Enum):
    INTERLEAVE = "interleave"
    MAJORITY = "majority"
    MINORITY = "minority"
    ALL_ONE = "all_one"
    ALL_ZERO = "all_zero"
    COINFLIP = "coinflip"


ALL_STRATEGIES = tuple(Strategy)


@dataclass(frozen=True, eq=False)
class Forgery:
    bits: np.ndarray
    strategy: Strategy
    coalition: tuple[int, ...]
    seed: int

    def __eq__(self, other):
        if not isinstance(other, Forgery):
            return NotImplemented
        return (self.strategy, self.coalition, self.seed) == (other.strategy, other.coalition, other.seed) \
            and np.array_equal(self.bits, other.bits)

    __hash__ = None

    def to_ascii(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def meta(self) -> dict:
        return {"strategy": self.strategy.value, "coalition": list(self.coalition),
                "seed": self.seed, "ell": int(self.bits.size)}


def _coalition(cb: Codebook, coalition: Iterable[int]) -> tuple[int, ...]:
    members = tuple(sorted(set(int(j) for j in coalition)))
    if not members:
        raise DomainError("coalition must be non-empty")
    if members[0] < 0 or members[-1] >= cb.n:
        raise IndexError(f"coalition index out of range for n = {cb.n}")
    return members


def forge(strategy: Strategy | str, cb: Codebook, coalition: Iterable[int], seed: int) -> Forgery:
    strategy = Strategy(strategy)
    members = _coalition(cb, coalition)
    cols = cb.rows(members)
    size = len(members)
    ones = cols.sum(axis=0)
    unanimous = (ones == 0) | (ones == size)
    u = rng.uniforms(rng.derive(seed, rng.TAG_ATTACK), cb.ell)
    coin = u < 0.5

    if strategy is Strategy.INTERLEAVE:
        pick = np.minimum((u * size).astype(np.int64), size - 1)
        mixed = cols[pick, np.arange(cb.ell)]
    elif strategy is Strategy.MAJORITY:
        mixed = np.where(2 * ones == size, coin, 2 * ones > size)
    elif strategy is Strategy.MINORITY:
        mixed = np.where(2 * ones == size, coin, 2 * ones < size)
    elif strategy is Strategy.ALL_ONE:
        mixed = np.ones(cb.ell, dtype=bool)
    elif strategy is Strategy.ALL_ZERO:
        mixed = np.zeros(cb.ell, dtype=bool)
    else:
        mixed = coin
    bits = np.where(unanimous, ones == size, mixed).astype(np.uint8)
    bits.setflags(write=False)
    return Forgery(bits=bits, strategy=strategy, coalition=members, seed=int(seed) & rng.MASK64)


def verify_marking(cb: Codebook, coalition: Iterable[int], y) -> bool:
    """True iff ``y`` matches every column on which the coalition agrees."""
    members = _coalition(cb, coalition)
    bits = np.asarray(getattr(y, "bits", y)).astype(bool)
    if bits.shape != (cb.ell,):
        raise DomainError("forgery length differs from ell")
    cols = cb.rows(members)
    ones = cols.sum(axis=0)
    forced_one = ones == len(members)
    forced_zero = ones == 0
    return bool(np.all(bits[forced_one]) and not np.any(bits[forced_zero]))
