"""Size-conditioned Galton-Watson trees and their planted versions.

Vertices are labelled ``1..n`` in breadth-first order with the root as
vertex 1.  Planting adds a base vertex ``0``; the edge joining vertex ``i`` to
its parent (the base, for the root) carries label ``i``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

from .errors import PreconditionError, SamplingError
from .offspring import OffspringLaw, _HistogramSampler

DEFAULT_MAX_ATTEMPTS = 1_000_000


@dataclass(frozen=True, eq=False)
class RootedTree:
    """A rooted tree on ``1..n`` given by its parent table (0 marks the root)."""

    parent: np.ndarray

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        n = parent.shape[0]
        if n == 0:
            raise PreconditionError("a tree has at least one vertex")
        if np.count_nonzero(parent == 0) != 1:
            raise PreconditionError("parent table must contain exactly one root")
        if parent.min() < 0 or parent.max() > n or np.any(parent == np.arange(1, n + 1)):
            raise PreconditionError("parent table has out-of-range entries")
        if len(self.bfs_order) != n:
            raise PreconditionError("parent table contains a cycle")

    @property
    def n(self) -> int:
        return self.parent.shape[0]

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parent == 0)[0]) + 1

    @cached_property
    def children(self) -> list[list[int]]:
        """``children[v]`` for v in 0..n; entry 0 lists the root."""
        ch: list[list[int]] = [[] for _ in range(self.n + 1)]
        for v, p in enumerate(self.parent.tolist(), start=1):
            ch[p].append(v)
        return ch

    @cached_property
    def bfs_order(self) -> list[int]:
        ch = self.children
        order, queue = [], deque(ch[0])
        seen = 0
        while queue and seen <= self.n:
            v = queue.popleft()
            order.append(v)
            queue.extend(ch[v])
            seen += 1
        return order

    @cached_property
    def depth(self) -> np.ndarray:
        """Depth of every vertex (index 0 is unused); the root has depth 0."""
        d = np.zeros(self.n + 1, dtype=np.int64)
        parent = self.parent
        for v in self.bfs_order:
            p = parent[v - 1]
            d[v] = 0 if p == 0 else d[p] + 1
        return d

    def offspring_counts(self) -> list[int]:
        """Child counts listed in breadth-first order."""
        ch = self.children
        return [len(ch[v]) for v in self.bfs_order]

    def is_bfs_labeled(self) -> bool:
        return self.bfs_order == list(range(1, self.n + 1))

    def __eq__(self, other):
        if not isinstance(other, RootedTree):
            return NotImplemented
        return np.array_equal(self.parent, other.parent)

    def __hash__(self):
        return hash(self.parent.tobytes())


@dataclass(frozen=True, eq=False)
class PlantedTree:
    """A rooted tree plus a base vertex 0 joined to its root.

    Edge ``i`` joins vertex ``i`` to ``tree.parent[i - 1]``, so the map from an
    edge to its endpoint farthest from the base is the identity on labels.
    """

    tree: RootedTree
    base: int = 0

    @property
    def n(self) -> int:
        return self.tree.n

    @cached_property
    def up(self) -> np.ndarray:
        """``up[i]`` is the endpoint of edge i nearer the base; index 0 unused."""
        return np.concatenate(([-1], self.tree.parent)).astype(np.int64)

    def edge_of_vertex(self, v: int) -> int:
        if not 1 <= v <= self.n:
            raise PreconditionError(f"vertex {v} is not in the tree")
        return v

    def vertex_of_edge(self, e: int) -> int:
        if not 1 <= e <= self.n:
            raise PreconditionError(f"edge {e} is not in the planted tree")
        return e

    def edges(self) -> list[tuple[int, int, int]]:
        """(label, endpoint far from the base, endpoint near the base) for every edge."""
        return [(i, i, int(p)) for i, p in enumerate(self.tree.parent.tolist(), start=1)]


def plant(tree: RootedTree) -> PlantedTree:
    return PlantedTree(tree)


def tree_from_offspring(counts: Iterable[int]) -> RootedTree:
    """Build the breadth-first-labelled tree encoded by a valid offspring sequence."""
    counts = np.asarray(list(counts), dtype=np.int64)
    n = counts.shape[0]
    if counts.sum() != n - 1 or not is_lukasiewicz(counts):
        raise PreconditionError("sequence is not a breadth-first tree encoding")
    parent = np.zeros(n, dtype=np.int64)
    parent[1:] = np.repeat(np.arange(1, n + 1), counts)
    return RootedTree(parent)


def is_lukasiewicz(counts) -> bool:
    """True if the walk with steps ``c - 1`` stays >= 0 until it first hits -1 at the end."""
    walk = np.cumsum(np.asarray(counts, dtype=np.int64) - 1)
    return bool(walk[-1] == -1 and (walk.shape[0] == 1 or walk[:-1].min() >= 0))


def cycle_lemma_rotate(counts: np.ndarray) -> np.ndarray:
    """Rotate a sequence with sum n - 1 to its unique valid cyclic shift."""
    walk = np.cumsum(counts - 1)
    start = int(np.argmin(walk)) + 1
    return np.roll(counts, -start)


def sample_conditioned_tree(
    law: OffspringLaw,
    n: int,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> RootedTree:
    """Sample a GW(law) tree conditioned on having exactly ``n`` vertices.

    Offspring histograms of n i.i.d. draws are rejected until the counts sum
    to n - 1; the accepted multiset is shuffled and rotated by the cycle
    lemma, which makes the result exact.
    """
    if n < 1:
        raise PreconditionError("n must be positive")
    if (n - 1) % law.support_gcd:
        raise PreconditionError(
            f"n-1 must be divisible by p={law.support_gcd} for law {law.name}"
        )
    sampler = _HistogramSampler(law, n)
    values = sampler.values
    batch = int(min(4096, max(16, 4 * np.sqrt(n))))
    attempts = 0
    while attempts < max_attempts:
        size = min(batch, max_attempts - attempts)
        hist = sampler.draw(rng, n, size)
        attempts += size
        base_sum = hist[:, :-1] @ values
        overflow = hist[:, -1]
        for row in np.flatnonzero((base_sum <= n - 1) & ((overflow > 0) | (base_sum == n - 1))):
            extra = sampler.tail_values(rng, int(overflow[row])) if overflow[row] else None
            if base_sum[row] + (extra.sum() if extra is not None else 0) != n - 1:
                continue
            counts = np.repeat(values, hist[row, :-1])
            if extra is not None:
                counts = np.concatenate((counts, extra))
            counts = cycle_lemma_rotate(rng.permutation(counts))
            parent = np.zeros(n, dtype=np.int64)
            parent[1:] = np.repeat(np.arange(1, n + 1), counts)
            return RootedTree(parent)
    raise SamplingError(
        f"no tree of size {n} after {attempts} attempts for law {law.name} "
        f"(p={law.support_gcd}); check that size n is reachable"
    )


def write_tree(tree: RootedTree, fh: TextIO) -> None:
    fh.write(f"{tree.n}\n")
    fh.write(" ".join(map(str, tree.parent.tolist())) + "\n")


def read_tree(fh: TextIO) -> RootedTree:
    lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise PreconditionError("tree file needs a size line and a parent line")
    n = int(lines[0])
    parent = [int(x) for x in lines[1].split()]
    if len(parent) != n:
        raise PreconditionError(f"expected {n} parent entries, got {len(parent)}")
    return RootedTree(np.array(parent, dtype=np.int64))


def enumerate_planar_trees(n: int):
    """Yield every planar rooted tree with n vertices as a breadth-first offspring tuple."""

    def rec(prefix, height, remaining):
        # height: current value of the Lukasiewicz walk
        if remaining == 0:
            if height == -1:
                yield tuple(prefix)
            return
        if height < 0:
            return
        for c in range(0, remaining):
            h = height + c - 1
            if h + 1 > remaining - 1:
                break
            prefix.append(c)
            yield from rec(prefix, h, remaining - 1)
            prefix.pop()

    yield from rec([], 0, n)
