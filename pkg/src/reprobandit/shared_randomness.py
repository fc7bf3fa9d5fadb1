"""Counter-addressed internal randomness shared between paired executions.

Every draw is a pure function of ``(seed, key, ordinal)``: the bytes are
hashed with BLAKE2b and the top 53 bits become a double in ``[0, 1)``.
Because nothing is consumed sequentially, two executions that pull a
different number of rewards still see the same thresholds, grid offsets
and design directions.

Reward noise never comes from here; see :class:`reprobandit.environments.RewardStream`.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

_U64 = 2**64
_INV_2_53 = 1.0 / 9007199254740992.0


class Purpose(enum.IntEnum):
    THRESHOLD = 0
    GRID_OFFSET = 1
    KY_DIRECTION = 2
    OTHER = 3


@dataclass(frozen=True)
class SubstreamKey:
    """Address of one independent substream of the shared randomness."""

    purpose: Purpose
    batch_index: int = 0
    arm_index: int = 0

    def __post_init__(self):
        if self.batch_index < 0 or self.arm_index < 0:
            raise ValueError("substream indices must be nonnegative")
        object.__setattr__(self, "purpose", Purpose(self.purpose))


def _seed_bytes(seed: int) -> bytes:
    if seed < 0:
        raise ValueError("shared seed must be nonnegative")
    n = max(1, (seed.bit_length() + 7) // 8)
    return struct.pack("<H", n) + seed.to_bytes(n, "little")


@dataclass(frozen=True)
class SharedSeed:
    """The internal randomness of one policy execution.

    Immutable; all draw methods are pure and thread-safe.
    """

    seed: int

    def __post_init__(self):
        # raises on negative seeds
        object.__setattr__(self, "_prefix", _seed_bytes(int(self.seed)))

    def bits(self, key: SubstreamKey, ordinal: int = 0) -> int:
        """64 hashed bits for ``(seed, key, ordinal)``."""
        if ordinal < 0:
            raise ValueError("ordinal must be nonnegative")
        msg = self._prefix + struct.pack(
            "<BQQQ",
            int(key.purpose),
            key.batch_index % _U64,
            key.arm_index % _U64,
            ordinal % _U64,
        )
        return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")

    def uniform01(self, key: SubstreamKey, ordinal: int = 0) -> float:
        return (self.bits(key, ordinal) >> 11) * _INV_2_53

    def uniform(self, key: SubstreamKey, lo: float, hi: float, ordinal: int = 0) -> float:
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if lo == hi:
            return lo
        return min(hi, lo + (hi - lo) * self.uniform01(key, ordinal))

    def normals(self, key: SubstreamKey, n: int) -> np.ndarray:
        """``n`` standard normal draws (Box-Muller on ordinals ``0..2n-1``)."""
        out = np.empty(n)
        for j in range(n):
            u1 = 1.0 - self.uniform01(key, 2 * j)  # (0, 1]
            u2 = self.uniform01(key, 2 * j + 1)
            out[j] = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return out


def draw_uniform(seed: SharedSeed, key: SubstreamKey, lo: float, hi: float, ordinal: int = 0) -> float:
    """Uniform draw on ``[lo, hi]`` addressed by ``(seed, key, ordinal)``."""
    return seed.uniform(key, lo, hi, ordinal)
