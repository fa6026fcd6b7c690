"""FIFO replay buffer storing executed transitions with their effective reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray          # 4-vector: cube_xy then effector_xy
    a: np.ndarray          # 2-vector in [-1, 1] (executed action, pre workspace scaling)
    s_next: np.ndarray
    r_eff: float
    done: bool
    queried: bool


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r_eff: np.ndarray
    done: np.ndarray
    queried: np.ndarray
    indices: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int = 50_000, obs_dim: int = 4, act_dim: int = 2,
                 dtype=np.float64) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._s = np.zeros((capacity, obs_dim), dtype=dtype)
        self._a = np.zeros((capacity, act_dim), dtype=dtype)
        self._s_next = np.zeros((capacity, obs_dim), dtype=dtype)
        self._r = np.zeros(capacity, dtype=dtype)
        self._done = np.zeros(capacity, dtype=dtype)
        self._queried = np.zeros(capacity, dtype=bool)
        self._ptr = 0
        self.size = 0

    def push(self, t: Transition) -> None:
        i = self._ptr
        self._s[i] = t.s
        self._a[i] = t.a
        self._s_next[i] = t.s_next
        self._r[i] = t.r_eff
        self._done[i] = 1.0 if t.done else 0.0
        self._queried[i] = t.queried
        self._ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sample without replacement within the batch."""
        if batch_size > self.size:
            raise ValueError(f"batch_size {batch_size} exceeds buffer size {self.size}")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return Batch(
            s=self._s[idx],
            a=self._a[idx],
            s_next=self._s_next[idx],
            r_eff=self._r[idx],
            done=self._done[idx],
            queried=self._queried[idx],
            indices=idx,
        )

    def get(self, index: int) -> Transition:
        if index >= self.size:
            raise IndexError(index)
        return Transition(
            s=self._s[index].copy(),
            a=self._a[index].copy(),
            s_next=self._s_next[index].copy(),
            r_eff=float(self._r[index]),
            done=bool(self._done[index]),
            queried=bool(self._queried[index]),
        )

    def __len__(self) -> int:
        return self.size
