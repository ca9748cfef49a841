"""Edge-deletion on planted trees and the resulting cut-tree.

The cut-tree has the n edge labels as leaves and one internal node per
removal step: the block (set of still-connected edges) that contained the
removed edge just before it went.  It is rebuilt by re-inserting edges in
reverse removal order with a disjoint-set structure.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _kernels
from .errors import ModeError, PreconditionError
from .gw_sampler import PlantedTree

ROOT = 0


@dataclass(frozen=True, eq=False)
class RemovalSchedule:
    """Edge labels in removal order; ``times[r]`` is the instant of removal r + 1."""

    order: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        object.__setattr__(self, "order", order)
        n = order.shape[0]
        if n == 0 or not np.array_equal(np.sort(order), np.arange(1, n + 1)):
            raise PreconditionError("removal order must be a permutation of 1..n")
        if self.times is not None:
            times = np.asarray(self.times, dtype=float)
            if times.shape != order.shape or np.any(np.diff(times) < 0) or times[0] < 0:
                raise PreconditionError("removal times must be nonnegative and sorted by rank")
            object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return self.order.shape[0]

    @property
    def continuous(self) -> bool:
        return self.times is not None


def sample_schedule(n: int, rng: np.random.Generator, mode: str = "discrete") -> RemovalSchedule:
    """Uniform removal order; in continuous mode each edge rings at rate 1/sqrt(n)."""
    if n < 1:
        raise PreconditionError("n must be positive")
    if mode == "discrete":
        return RemovalSchedule(rng.permutation(n) + 1)
    if mode == "continuous":
        clocks = rng.exponential(math.sqrt(n), size=n)
        # stable sort breaks floating-point ties by edge label
        order = np.argsort(clocks, kind="stable")
        return RemovalSchedule(order + 1, clocks[order])
    raise ModeError(f"unknown schedule mode {mode!r}")


@dataclass(eq=False)
class CutTree:
    """Block genealogy of one deletion run.

    Node ``i - 1`` is leaf i; node ``2n - r`` is the block split at removal
    step r, with the root block [n] at ``2n - 1``.
    """

    n: int
    parent: np.ndarray
    size: np.ndarray
    step: np.ndarray
    depth: np.ndarray = field(init=False)

    def __post_init__(self):
        self.depth = _kernels.node_depths(self.parent)

    @property
    def root(self) -> int:
        return 2 * self.n - 1

    @property
    def node_count(self) -> int:
        return 2 * self.n

    def node_of(self, point: int) -> int:
        """Cut-tree node of a point: 0 is the root, i >= 1 is leaf i."""
        if point == ROOT:
            return self.root
        if not 1 <= point <= self.n:
            raise PreconditionError(f"point {point} is outside {{0}} and 1..{self.n}")
        return point - 1

    def is_leaf(self, node: int) -> bool:
        return node < self.n

    @cached_property
    def ancestors(self) -> np.ndarray:
        """Binary-lifting table: ``ancestors[j, v]`` is the 2**j-th ancestor (root is absorbing)."""
        base = self.parent.copy()
        base[self.root] = self.root
        levels = max(1, int(self.depth.max()).bit_length())
        table = np.empty((levels, base.shape[0]), dtype=np.int64)
        table[0] = base
        for j in range(1, levels):
            table[j] = table[j - 1][table[j - 1]]
        return table

    def lca(self, u: int, v: int) -> int:
        depth, up = self.depth, self.ancestors
        if depth[u] < depth[v]:
            u, v = v, u
        diff = int(depth[u] - depth[v])
        j = 0
        while diff:
            if diff & 1:
                u = int(up[j, u])
            diff >>= 1
            j += 1
        if u == v:
            return u
        for j in range(up.shape[0] - 1, -1, -1):
            if up[j, u] != up[j, v]:
                u, v = int(up[j, u]), int(up[j, v])
        return int(self.parent[u])

    def children(self) -> list[list[int]]:
        """Child lists ordered by block-creation step, then by smallest leaf label."""
        kids: list[list[int]] = [[] for _ in range(self.node_count)]
        for v in range(self.node_count - 1):
            kids[self.parent[v]].append(v)
        minlab = self._min_labels()
        for lst in kids:
            lst.sort(key=lambda c: (-int(self.step[c]) if c >= self.n else 0, minlab[c]))
        return kids

    def _min_labels(self) -> np.ndarray:
        minlab = np.full(self.node_count, np.iinfo(np.int64).max, dtype=np.int64)
        minlab[: self.n] = np.arange(1, self.n + 1)
        for v in range(self.node_count - 1):
            p = self.parent[v]
            minlab[p] = min(minlab[p], minlab[v])
        return minlab

    def dump(self, fh: TextIO) -> None:
        """One line per node: ``id kind parent depth``."""
        for v in range(self.node_count):
            kind = "leaf" if self.is_leaf(v) else "block"
            fh.write(f"{v} {kind} {int(self.parent[v])} {int(self.depth[v])}\n")


def build_cut_tree(planted: PlantedTree, schedule: RemovalSchedule) -> CutTree:
    if schedule.n != planted.n:
        raise PreconditionError(
            f"schedule covers {schedule.n} edges but the planted tree has {planted.n}"
        )
    parent, size, step = _kernels.cut_tree_sweep(planted.up, schedule.order)
    return CutTree(planted.n, parent, size, step)


def cut_distance(ct: CutTree, a: int, b: int) -> int:
    """Graph distance between two points of {0} and 1..n in the cut-tree."""
    u, v = ct.node_of(a), ct.node_of(b)
    if u == v:
        return 0
    w = ct.lca(u, v)
    return int(ct.depth[u] + ct.depth[v] - 2 * ct.depth[w])


def distance_matrix(ct: CutTree, points: Sequence[int]) -> np.ndarray:
    """Pairwise cut distances between the root and ``points`` (root is row 0)."""
    pts = [ROOT, *points]
    m = len(pts)
    out = np.zeros((m, m), dtype=np.int64)
    for x in range(m):
        for y in range(x + 1, m):
            out[x, y] = out[y, x] = cut_distance(ct, pts[x], pts[y])
    return out


def write_matrix_csv(mat: np.ndarray, fh: TextIO) -> None:
    fh.write(",".join(f"p{j}" for j in range(mat.shape[0])) + "\n")
    for row in mat:
        fh.write(",".join(str(x) for x in row.tolist()) + "\n")


def path_edge_counts(planted: PlantedTree, i: int) -> list[int]:
    """For each edge j, the number of edges on the path joining edges i and j, both included.

    When one of the lower endpoints is an ancestor of the other this is their
    vertex distance plus one; otherwise the edge above their common ancestor
    is not on the path and the count equals the vertex distance.
    """
    tree = planted.tree
    n = tree.n
    i = planted.vertex_of_edge(i)
    parent = tree.parent
    anc_i = set()
    v = i
    while v:
        anc_i.add(v)
        v = int(parent[v - 1])
    # vertex distances from i by BFS on the undirected tree
    adj = tree.children
    dist = [-1] * (n + 1)
    dist[i] = 0
    queue = deque([i])
    while queue:
        v = queue.popleft()
        nbrs = list(adj[v])
        if parent[v - 1]:
            nbrs.append(int(parent[v - 1]))
        for w in nbrs:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    out = [0] * (n + 1)
    for j in range(1, n + 1):
        if j in anc_i:
            out[j] = dist[j] + 1
            continue
        v, related = j, False
        while v:
            if v == i:
                related = True
                break
            v = int(parent[v - 1])
        out[j] = dist[j] + 1 if related else dist[j]
    return out[1:]


def expected_cut_distance_exact(planted: PlantedTree, i: int) -> Fraction:
    """Mean number of removals from blocks containing edge i, over uniform removal orders.

    Edge j is removed while still connected to i exactly when it is the first
    to go among the edges of the path joining them.
    """
    return sum((Fraction(1, m) for m in path_edge_counts(planted, i)), Fraction(0))


def modified_distance(
    planted: PlantedTree,
    schedule: RemovalSchedule,
    a: int,
    b: int,
    ct: CutTree | None = None,
) -> float:
    """Time-integrated normalised block sizes (the continuous-clock cut distance).

    ``(0, i)`` integrates the mass of the block holding edge i over all time;
    ``(i, j)`` integrates both masses from the instant i and j are separated.
    Block sizes are piecewise constant, so the integral is a finite sum.
    """
    if not schedule.continuous:
        raise ModeError("modified distance needs a continuous-time schedule")
    if ct is None:
        ct = build_cut_tree(planted, schedule)
    if a == b:
        return 0.0
    times = schedule.times
    u, v = ct.node_of(a), ct.node_of(b)
    if a == ROOT or b == ROOT:
        leaf = v if a == ROOT else u
        return _integrate_from(ct, times, leaf, ct.root, include_stop=True)
    w = ct.lca(u, v)
    return _integrate_from(ct, times, u, w) + _integrate_from(ct, times, v, w)


def _integrate_from(ct: CutTree, times: np.ndarray, leaf: int, stop: int, include_stop=False) -> float:
    acc = 0.0
    node = int(ct.parent[leaf])
    while node != stop or include_stop:
        p = int(ct.parent[node])
        start = 0.0 if p < 0 else times[ct.step[p] - 1]
        acc += ct.size[node] * (times[ct.step[node] - 1] - start)
        if node == stop:
            break
        node = p
    return acc / ct.n


def count_cuts(planted: PlantedTree, schedule: RemovalSchedule, marked: Iterable[int]) -> int:
    """Removals performed on blocks holding a marked edge until every marked edge is gone."""
    marked = list(marked)
    if not marked:
        raise PreconditionError("at least one marked edge is required")
    flags = np.zeros(planted.n + 1, dtype=np.int64)
    for e in marked:
        flags[planted.vertex_of_edge(int(e))] = 1
    return int(_kernels.marked_cut_count(planted.up, schedule.order, flags))


@dataclass(eq=False)
class ReducedTree:
    """A rooted tree with labelled leaves and edge lengths.

    Node 0 is the root; ``parent[v]`` and ``length[v]`` describe the edge
    above node v.  ``leaves[j]`` is the node of the (j+1)-th leaf, whose
    external label is ``labels[j]``.
    """

    parent: np.ndarray
    length: np.ndarray
    leaves: np.ndarray
    labels: np.ndarray | None = None
    internal_count: int | None = None

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.length = np.asarray(self.length, dtype=float)
        self.leaves = np.asarray(self.leaves, dtype=np.int64)
        if self.labels is None:
            self.labels = np.arange(1, self.leaves.shape[0] + 1)
        if self.parent[0] != -1:
            raise PreconditionError("node 0 must be the root")
        if np.any(self.leaves == 0):
            raise PreconditionError("the root cannot be a leaf")
        if np.any(self.length[1:] <= 0):
            raise PreconditionError("edge lengths must be positive")

    @property
    def k(self) -> int:
        return self.leaves.shape[0]

    @property
    def node_count(self) -> int:
        return self.parent.shape[0]

    @property
    def total_length(self) -> float:
        return float(self.length[1:].sum())

    def edges(self) -> list[tuple[int, int, int, float]]:
        """(edge id, parent node, child node, length); edge id = child node."""
        return [(v, int(self.parent[v]), v, float(self.length[v])) for v in range(1, self.node_count)]

    def depth_of(self, node: int) -> float:
        d = 0.0
        while node > 0:
            d += self.length[node]
            node = int(self.parent[node])
        return d

    def write(self, fh: TextIO) -> None:
        fh.write(f"{self.k}\n")
        for eid, p, c, ln in self.edges():
            fh.write(f"{eid} {p} {c} {ln!r}\n")


def reduce_cut_tree(ct: CutTree, leaves: Iterable[int]) -> ReducedTree:
    """Subtree spanned by the root and the given leaves, unary chains contracted.

    Lengths count cut-tree hops; ``internal_count`` is the number of blocks
    in the span and ``total_length`` the number of spanned edges.
    """
    labels = sorted({int(x) for x in leaves})
    if not labels:
        raise PreconditionError("at least one leaf is required")
    nodes = [ct.node_of(x) for x in labels]
    if any(x == ROOT for x in labels):
        raise PreconditionError("leaf labels start at 1")
    span_children: dict[int, int] = {ct.root: 0}
    for v in nodes:
        if v in span_children:
            continue
        span_children[v] = 0
        while True:
            p = int(ct.parent[v])
            if p in span_children:
                span_children[p] += 1
                break
            span_children[p] = 1
            v = p
    internal = sum(1 for v in span_children if not ct.is_leaf(v))
    keep = {v for v, c in span_children.items() if v == ct.root or ct.is_leaf(v) or c >= 2}
    # contracted tree: walk from every kept node to its nearest kept ancestor
    ids = {ct.root: 0}
    ordered = sorted(keep - {ct.root}, key=lambda v: int(ct.depth[v]))
    for v in ordered:
        ids[v] = len(ids)
    parent = np.full(len(ids), -1, dtype=np.int64)
    length = np.zeros(len(ids))
    for v in ordered:
        hops, p = 1, int(ct.parent[v])
        while p not in keep:
            hops += 1
            p = int(ct.parent[p])
        parent[ids[v]] = ids[p]
        length[ids[v]] = hops
    return ReducedTree(
        parent,
        length,
        np.array([ids[v] for v in nodes], dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        internal_count=internal,
    )


def simulate_deletion(planted: PlantedTree, order: Sequence[int]) -> list[int]:
    """Forward run of the deletion process by explicit component search.

    Returns, for every edge label i, the number of removals performed on
    blocks containing i (index 0 unused).  Quadratic; meant as an oracle.
    """
    n = planted.n
    up = planted.up
    present = [True] * (n + 1)
    # incident edges per vertex of the planted tree (vertex 0 is the base)
    incident: list[list[int]] = [[] for _ in range(n + 1)]
    for e in range(1, n + 1):
        incident[e].append(e)
        incident[int(up[e])].append(e)
    counts = [0] * (n + 1)
    for e in order:
        block = _block_of(e, up, incident, present)
        for f in block:
            counts[f] += 1
        present[e] = False
    return counts


def _block_of(e, up, incident, present) -> list[int]:
    seen_e = {e}
    seen_v = set()
    queue = deque([e, int(up[e])])
    while queue:
        x = queue.popleft()
        if x in seen_v:
            continue
        seen_v.add(x)
        for f in incident[x]:
            if present[f] and f not in seen_e:
                seen_e.add(f)
                queue.append(f)
                queue.append(int(up[f]))
    return sorted(seen_e)


def simulate_modified_height(planted: PlantedTree, schedule: RemovalSchedule, i: int) -> float:
    """Forward evaluation of the integral of the normalised size of i's block."""
    if not schedule.continuous:
        raise ModeError("modified distance needs a continuous-time schedule")
    n = planted.n
    up = planted.up
    present = [True] * (n + 1)
    incident: list[list[int]] = [[] for _ in range(n + 1)]
    for e in range(1, n + 1):
        incident[e].append(e)
        incident[int(up[e])].append(e)
    acc, prev = 0.0, 0.0
    for e, t in zip(schedule.order.tolist(), schedule.times.tolist()):
        acc += len(_block_of(i, up, incident, present)) * (t - prev)
        prev = t
        if e == i:
            break
        present[e] = False
    return acc / n
