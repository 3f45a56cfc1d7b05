"""Proportional prioritized replay backed by an array sum-tree."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SumTree:
    """Binary sum-tree over ``capacity`` leaves, padded to a power of two.

    Node ``i`` (1-based heap layout) has children ``2i`` and ``2i+1``; leaf
    ``j`` lives at ``offset + j``.  Parents are always recomputed as
    ``left + right`` instead of being adjusted by deltas, so the invariant
    holds exactly rather than up to accumulated rounding.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.offset = 1 << max(0, (capacity - 1).bit_length())
        self.nodes = np.zeros(2 * self.offset)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def leaves(self) -> np.ndarray:
        return self.nodes[self.offset:self.offset + self.capacity]

    def set(self, leaf_indices, values) -> None:
        idx = np.atleast_1d(np.asarray(leaf_indices, dtype=np.int64)) + self.offset
        vals = np.broadcast_to(np.asarray(values, dtype=float), idx.shape)
        if np.any(vals < 0):
            raise ValueError("sum-tree values must be non-negative")
        self.nodes[idx] = vals
        if idx.size == 1:
            node, nodes = int(idx[0]) >> 1, self.nodes
            while node >= 1:
                nodes[node] = nodes[2 * node] + nodes[2 * node + 1]
                node >>= 1
            return
        idx = np.unique(idx >> 1)
        while idx[0] >= 1:
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1]
            if idx[0] == 1:
                break
            idx = np.unique(idx >> 1)

    def find(self, mass) -> np.ndarray:
        """Leaf indices whose cumulative-sum interval contains each ``mass``."""
        u = np.array(mass, dtype=float, ndmin=1)
        node = np.ones(u.shape, dtype=np.int64)
        while node[0] < self.offset:
            left = 2 * node
            lv = self.nodes[left]
            # rounding can push u past a subtree's mass; never step into an empty right subtree
            go_left = (u < lv) | (self.nodes[left + 1] <= 0.0)
            u = np.where(go_left, u, u - lv)
            node = np.where(go_left, left, left + 1)
        return node - self.offset

    def check(self, rtol: float = 0.0) -> bool:
        internal = np.arange(1, self.offset)
        s = self.nodes[2 * internal] + self.nodes[2 * internal + 1]
        return bool(np.all(np.abs(self.nodes[internal] - s) <= rtol * np.abs(s)))


@dataclass
class SampledBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.indices)


class PrioritizedBuffer:
    """Ring buffer of (s, a, r, s') with proportional prioritized sampling.

    ``alpha=0`` gives uniform replay with unit importance weights.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 alpha: float = 0.6, kappa: float = 0.4, eps: float = 0.01):
        if not 0.0 <= alpha <= 1.0 or not 0.0 <= kappa <= 1.0:
            raise ValueError("alpha and kappa must lie in [0, 1]")
        if eps <= 0:
            raise ValueError("priority floor eps must be positive")
        self.capacity = capacity
        self.alpha = alpha
        self.kappa = kappa
        self.eps = eps
        self.tree = SumTree(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.priorities = np.zeros(capacity)
        self.max_priority = 1.0
        self.size = 0
        self.cursor = 0

    def __len__(self):
        return self.size

    def _leaf_value(self, p):
        return np.power(p, self.alpha)

    def push(self, state, action, reward, next_state) -> int:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.priorities[i] = self.max_priority
        self.tree.set(i, self._leaf_value(self.max_priority))
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        leaves = self.tree.leaves()[: self.size]
        return leaves / leaves.sum()

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Stratified proportional draw: one leaf per equal-mass segment."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        total = self.tree.total
        mass = (np.arange(n) + rng.random(n)) * (total / n)
        idx = self.tree.find(np.minimum(mass, np.nextafter(total, 0.0)))
        return np.minimum(idx, self.size - 1)

    def sample(self, batch_size: int, rng: np.random.Generator) -> SampledBatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} units, cannot sample {batch_size}")
        idx = self.sample_indices(batch_size, rng)
        prob = self.tree.nodes[idx + self.tree.offset] / self.tree.total
        w = np.power(self.size * prob, -self.kappa)
        w /= w.max()
        return SampledBatch(self.states[idx], self.actions[idx], self.rewards[idx],
                            self.next_states[idx], idx, w)

    def update_priorities(self, indices, td_errors) -> None:
        idx = np.asarray(indices, dtype=np.int64)
        td = np.asarray(td_errors, dtype=float)
        if idx.shape != td.shape:
            raise ValueError("indices and td_errors differ in length")
        if idx.size == 0:
            return
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise IndexError(f"priority index outside 0..{self.size - 1}")
        if not np.all(np.isfinite(td)):
            raise ValueError("non-finite TD error")
        p = np.abs(td) + self.eps
        self.priorities[idx] = p
        self.tree.set(idx, self._leaf_value(p))
        self.max_priority = max(self.max_priority, float(p.max()))
