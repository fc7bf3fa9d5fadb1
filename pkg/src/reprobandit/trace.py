from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ExecutionTrace:
    """Arms pulled by one execution, with the observed rewards.

    ``arms`` holds integer arm identifiers: arm indices for K-armed bandits,
    row indices into ``points`` for linear bandits.
    """

    arms: np.ndarray
    rewards: np.ndarray
    batch_log: list[dict] = field(default_factory=list)
    points: np.ndarray | None = None

    def __post_init__(self):
        if len(self.arms) != len(self.rewards):
            raise ValueError("arms and rewards differ in length")

    @property
    def T(self) -> int:
        return len(self.arms)


class TraceBuilder:
    """Collects (arm, rewards) blocks and concatenates them once at the end."""

    def __init__(self):
        self._arms: list[int] = []
        self._counts: list[int] = []
        self._rewards: list[np.ndarray] = []
        self.total = 0

    def add(self, arm: int, rewards: np.ndarray) -> None:
        n = len(rewards)
        if n == 0:
            return
        self._arms.append(int(arm))
        self._counts.append(n)
        self._rewards.append(np.asarray(rewards, dtype=float))
        self.total += n

    def build(self, batch_log=None, points=None) -> ExecutionTrace:
        arms = np.repeat(np.asarray(self._arms, dtype=np.int64), self._counts)
        rewards = np.concatenate(self._rewards) if self._rewards else np.empty(0)
        return ExecutionTrace(arms, rewards, batch_log or [], points)


def first_divergence(a: np.ndarray, b: np.ndarray) -> int | None:
    """Index of the first differing arm, or ``None`` when the sequences match."""
    n = min(len(a), len(b))
    diff = np.flatnonzero(a[:n] != b[:n])
    if diff.size:
        return int(diff[0])
    if len(a) != len(b):
        return n
    return None
