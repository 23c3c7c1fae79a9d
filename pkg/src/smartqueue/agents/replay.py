"""Experience storage for the learning agents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import StateError


@dataclass
class Experience:
    """One joint transition ``(O, A, O', R, C, done)`` over all N agents.

    ``obs``/``next_obs`` hold the network inputs (N x 6), ``adjacency`` the
    per-agent one-hot neighbourhood matrices and ``mask`` their N x N union.
    """

    obs: np.ndarray
    actions: np.ndarray
    next_obs: np.ndarray
    rewards: np.ndarray
    adjacency: list[np.ndarray]
    mask: np.ndarray
    done: np.ndarray


@dataclass
class Batch:
    obs: np.ndarray  # (S, N, 6)
    actions: np.ndarray  # (S, N) int
    next_obs: np.ndarray  # (S, N, 6)
    rewards: np.ndarray  # (S, N)
    mask: np.ndarray  # (S, N, N) bool
    done: np.ndarray  # (S, N) bool

    @classmethod
    def stack(cls, items: list[Experience]) -> "Batch":
        return cls(
            np.stack([e.obs for e in items]),
            np.stack([np.asarray(e.actions, dtype=np.int64) for e in items]),
            np.stack([e.next_obs for e in items]),
            np.stack([np.asarray(e.rewards, dtype=np.float64) for e in items]),
            np.stack([e.mask for e in items]),
            np.stack([np.asarray(e.done, dtype=bool) for e in items]),
        )

    def __len__(self) -> int:
        return len(self.obs)


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling.

    A batch never repeats an entry. ``keep`` optionally filters which
    experiences are eligible for sampling (they are stored regardless).
    """

    def __init__(self, capacity: int = 20000, seed: int | np.random.Generator = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self._items: list[Experience] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, exp: Experience) -> None:
        if len(self._items) < self.capacity:
            self._items.append(exp)
        else:
            self._items[self._next] = exp
        self._next = (self._next + 1) % self.capacity

    def __getitem__(self, i: int) -> Experience:
        return self._items[i]

    def eligible(self, keep: Callable[[Experience], bool] | None = None) -> np.ndarray:
        if keep is None:
            return np.arange(len(self._items))
        return np.array([i for i, e in enumerate(self._items) if keep(e)], dtype=np.int64)

    def sample_indices(self, size: int, keep: Callable[[Experience], bool] | None = None) -> np.ndarray:
        pool = self.eligible(keep)
        if len(pool) == 0:
            raise StateError("replay buffer has no eligible experiences")
        if len(pool) < size:
            raise StateError(f"replay buffer holds {len(pool)} eligible experiences, need {size}")
        return pool[self.rng.choice(len(pool), size=size, replace=False)]

    def sample(self, size: int, keep: Callable[[Experience], bool] | None = None) -> Batch:
        return Batch.stack([self._items[i] for i in self.sample_indices(size, keep)])
