"""Finite-dimensional Brownian CRT and its Poissonian logging.

Reduced trees come from Aldous' line-breaking construction.  Marks fall on
the skeleton at rate 1 per unit length per unit time; the cut distance
integrates the mass of the component holding a leaf, with the mass measure
estimated by the fraction of the k sample leaves in that component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cut_process import ReducedTree
from .errors import HorizonError, PreconditionError

DEFAULT_EPS_FRACTION = 1e-3
DEFAULT_HORIZON = 8.0
MASS_ESTIMATORS = ("exclusive", "inclusive")


def line_break_reduced_tree(k: int, rng: np.random.Generator) -> ReducedTree:
    """Root + k leaves of the Brownian CRT via Poisson line-breaking.

    Cut points of a Poisson process with intensity t dt split [0, inf) into
    sticks; stick 1 joins the root to leaf 1 and stick m is glued at a
    uniform point of the first m - 1 sticks.  Node layout: root 0, leaf m at
    node m, the branch point created by stick m at node k + m - 1.
    """
    if k < 1:
        raise PreconditionError("k must be positive")
    cuts = np.sqrt(2.0 * np.cumsum(rng.exponential(size=k)))
    starts = np.concatenate(([0.0], cuts[:-1]))
    glue = rng.random(k - 1) * cuts[:-1]  # attachment point of sticks 2..k
    # stick index (0-based) holding each glue point
    host = np.searchsorted(cuts, glue, side="left")

    # points along the line: (position, node); each stick contributes its
    # start, the glue points it hosts, and its far end (a leaf)
    pos = np.concatenate((starts, glue, cuts))
    stick = np.concatenate((np.arange(k), host, np.arange(k)))
    node = np.concatenate(([0], k + np.arange(1, k), k + np.arange(1, k), np.arange(1, k + 1)))
    # order by stick, then position; a stick start sorts before any glue point on it
    rank = np.concatenate((np.zeros(k), np.ones(k - 1), np.full(k, 2.0)))
    order = np.lexsort((rank, pos, stick))
    pos, stick, node = pos[order], stick[order], node[order]

    parent = np.full(2 * k, -1, dtype=np.int64)
    length = np.zeros(2 * k)
    same = stick[1:] == stick[:-1]
    child = node[1:][same]
    parent[child] = node[:-1][same]
    length[child] = (pos[1:] - pos[:-1])[same]
    return ReducedTree(parent, length, np.arange(1, k + 1))


@dataclass(frozen=True)
class MarkSequence:
    """Marks in time order; ``edges[j]`` is the child node of the marked edge."""

    times: np.ndarray
    edges: np.ndarray
    offsets: np.ndarray
    horizon: float

    def __len__(self):
        return self.times.shape[0]


def _skeleton_lookup(tree: ReducedTree):
    lengths = tree.length[1:]
    cum = np.concatenate(([0.0], np.cumsum(lengths)))
    return cum


def _place(tree: ReducedTree, u: np.ndarray):
    cum = _skeleton_lookup(tree)
    idx = np.searchsorted(cum, u, side="right") - 1
    idx = np.clip(idx, 0, tree.node_count - 2)
    offsets = np.minimum(u - cum[idx], tree.length[1:][idx])
    return idx + 1, offsets


def poisson_marks(
    tree: ReducedTree,
    rng: np.random.Generator,
    horizon: float | None = None,
    max_marks: int | None = None,
) -> MarkSequence:
    """Poisson marks with intensity dt x (length) on the skeleton.

    Stops at time ``horizon`` or after ``max_marks`` marks; with
    ``max_marks`` the horizon is the last mark time.
    """
    total = tree.total_length
    if not total > 0:
        raise PreconditionError("tree has zero total length")
    if (horizon is None) == (max_marks is None):
        raise PreconditionError("give exactly one of horizon and max_marks")
    if horizon is not None:
        count = rng.poisson(total * horizon)
        times = np.sort(rng.random(count) * horizon)
        end = float(horizon)
    else:
        times = np.cumsum(rng.exponential(1.0 / total, size=max_marks))
        end = float(times[-1]) if max_marks else 0.0
    edges, offsets = _place(tree, rng.random(times.shape[0]) * total)
    return MarkSequence(times, edges, offsets, end)


def extend_marks(tree: ReducedTree, marks: MarkSequence, horizon: float, rng) -> MarkSequence:
    """Continue a mark sequence up to a later horizon."""
    if horizon <= marks.horizon:
        return marks
    extra = poisson_marks(tree, rng, horizon=horizon - marks.horizon)
    return MarkSequence(
        np.concatenate((marks.times, extra.times + marks.horizon)),
        np.concatenate((marks.edges, extra.edges)),
        np.concatenate((marks.offsets, extra.offsets)),
        horizon,
    )


class FragmentationState:
    """Component history of tagged leaves under a fixed mark sequence.

    ``counts[j, t]`` / ``lengths[j, t]`` give the sample-leaf count and
    skeleton length of tagged leaf t's component after the first j marks;
    ``ids`` identifies components within one row.

    Component mass is estimated from sample-leaf counts.  ``"exclusive"``
    uses (c - 1) / (k - 1): the other k - 1 leaves are i.i.d. from the mass
    measure, so this is unbiased at every time.  ``"inclusive"`` uses c / k,
    which keeps charging 1/k per unit time until the stop rule fires.  With
    k = 1 only the inclusive form makes sense and is used.
    """

    def __init__(self, tree: ReducedTree, marks: MarkSequence, tagged, eps: float | None = None,
                 mass: str = "exclusive"):
        if mass not in MASS_ESTIMATORS:
            raise PreconditionError(f"unknown mass estimator {mass!r}")
        self.tree = tree
        self.marks = marks
        self.k = tree.k
        self.mass = "inclusive" if tree.k == 1 else mass
        self.tagged = [int(x) for x in tagged]
        for x in self.tagged:
            if not 1 <= x <= tree.k:
                raise PreconditionError(f"leaf {x} is not among 1..{tree.k}")
        self.eps = DEFAULT_EPS_FRACTION * tree.total_length if eps is None else eps
        nv = tree.node_count
        nmarks = np.bincount(marks.edges, minlength=nv).astype(np.int64)
        by_pos = np.lexsort((marks.offsets, marks.edges))
        rank = np.empty(len(marks), dtype=np.int64)
        # 1-based position of each mark along its edge
        first = np.searchsorted(marks.edges[by_pos], marks.edges[by_pos], side="left")
        rank[by_pos] = np.arange(len(marks)) - first + 1
        seg_len = self._segment_lengths(tree, marks, by_pos, nmarks)
        leaf_weight = np.zeros(nv, dtype=np.int64)
        leaf_weight[tree.leaves] = 1
        nodes = np.array([tree.leaves[x - 1] for x in self.tagged], dtype=np.int64)
        self.counts, self.lengths, self.ids = _kernels.fragmentation_sweep(
            tree.parent, tree.length, leaf_weight, marks.edges.astype(np.int64), rank,
            nmarks, seg_len, nodes,
        )
        self.times = np.concatenate(([0.0], marks.times))

    @staticmethod
    def _segment_lengths(tree, marks, by_pos, nmarks):
        # boundaries per edge: 0, the marks in order along the edge, full length
        v = np.arange(1, tree.node_count)
        edge = np.concatenate((v, marks.edges[by_pos], v))
        pos = np.concatenate((np.zeros(v.size), marks.offsets[by_pos], tree.length[1:]))
        kind = np.concatenate((np.zeros(v.size), np.ones(len(marks)), np.full(v.size, 2.0)))
        order = np.lexsort((kind, pos, edge))
        edge, pos = edge[order], pos[order]
        same = edge[1:] == edge[:-1]
        return np.diff(pos)[same]

    def _column(self, leaf: int) -> int:
        try:
            return self.tagged.index(leaf)
        except ValueError:
            raise PreconditionError(f"leaf {leaf} is not tagged") from None

    def stop_index(self, leaf: int) -> int:
        """First row where the leaf is alone in a component shorter than eps."""
        c = self._column(leaf)
        done = (self.counts[:, c] == 1) & (self.lengths[:, c] < self.eps)
        if not done.any():
            raise HorizonError(f"leaf {leaf} not isolated before time {self.marks.horizon}")
        return int(np.argmax(done))

    def separation_index(self, a: int, b: int) -> int:
        ca, cb = self._column(a), self._column(b)
        apart = self.ids[:, ca] != self.ids[:, cb]
        if not apart.any():
            raise HorizonError(f"leaves {a} and {b} never separated")
        return int(np.argmax(apart))

    def mass_integral(self, leaf: int, start_row: int = 0) -> float:
        """Integral of the estimated component mass from mark ``start_row`` to the stop time."""
        c = self._column(leaf)
        stop = self.stop_index(leaf)
        if stop <= start_row:
            return 0.0
        dt = np.diff(self.times[start_row: stop + 1])
        counts = self.counts[start_row:stop, c]
        if self.mass == "exclusive":
            return float(dt @ (counts - 1)) / (self.k - 1)
        return float(dt @ counts) / self.k


def estimate_height(tree: ReducedTree, marks: MarkSequence, leaf: int, eps: float | None = None,
                    mass: str = "exclusive") -> float:
    state = FragmentationState(tree, marks, [leaf], eps, mass)
    return state.mass_integral(leaf)


def estimate_delta(tree: ReducedTree, marks: MarkSequence, leaf_a: int, leaf_b: int,
                   eps: float | None = None, mass: str = "exclusive") -> float:
    if leaf_a == leaf_b:
        return 0.0
    state = FragmentationState(tree, marks, sorted((leaf_a, leaf_b)), eps, mass)
    return _delta(state, leaf_a, leaf_b)


def _delta(state: FragmentationState, a: int, b: int) -> float:
    j = state.separation_index(a, b)
    return state.mass_integral(a, j) + state.mass_integral(b, j)


def fragment(
    tree: ReducedTree,
    tagged,
    rng: np.random.Generator,
    horizon: float | None = None,
    eps: float | None = None,
    max_doublings: int = 30,
    mass: str = "exclusive",
) -> FragmentationState:
    """Run the logging with the horizon doubled until every tagged leaf is isolated.

    Pendant edges have length of order 1/sqrt(k), so the default starting
    horizon grows like sqrt(k).
    """
    if horizon is None:
        horizon = max(DEFAULT_HORIZON, 4.0 * math.sqrt(tree.k))
    marks = poisson_marks(tree, rng, horizon=horizon)
    for _ in range(max_doublings):
        state = FragmentationState(tree, marks, tagged, eps, mass)
        try:
            for x in state.tagged:
                state.stop_index(x)
            return state
        except HorizonError:
            marks = extend_marks(tree, marks, 2.0 * marks.horizon, rng)
    raise HorizonError(f"tagged leaves not isolated by time {marks.horizon}")


def delta_matrix_estimate(k: int, m: int, rng: np.random.Generator, eps: float | None = None,
                          mass: str = "exclusive") -> np.ndarray:
    """One continuum sample of the cut-distance matrix between the root and leaves 1..m."""
    if m > k:
        raise PreconditionError("cannot tag more leaves than the tree has")
    out = np.zeros((m + 1, m + 1))
    if m == 0:
        return out
    tree = line_break_reduced_tree(k, rng)
    state = fragment(tree, range(1, m + 1), rng, eps=eps, mass=mass)
    for i in range(1, m + 1):
        out[0, i] = out[i, 0] = state.mass_integral(i)
        for j in range(i + 1, m + 1):
            out[i, j] = out[j, i] = _delta(state, i, j)
    return out


def path_length(tree: ReducedTree, a: int, b: int) -> float:
    """Distance between two nodes of a reduced tree."""
    anc = {}
    d, v = 0.0, a
    while v >= 0:
        anc[v] = d
        d += tree.length[v] if v > 0 else 0.0
        v = int(tree.parent[v]) if v > 0 else -1
    d, v = 0.0, b
    while v not in anc:
        d += tree.length[v]
        v = int(tree.parent[v])
    return d + anc[v]


def first_mark_on_path(tree: ReducedTree, marks: MarkSequence, a: int, b: int) -> float:
    """Time of the first mark on the geodesic between nodes a and b (inf if none)."""
    path_edges = set()
    anc = []
    v = a
    while v > 0:
        anc.append(v)
        v = int(tree.parent[v])
    up_a = set(anc) | {0}
    v = b
    while v not in up_a:
        path_edges.add(v)
        v = int(tree.parent[v])
    meet = v
    for u in anc:
        if u == meet:
            break
        path_edges.add(u)
    hit = np.isin(marks.edges, list(path_edges))
    return float(marks.times[hit][0]) if hit.any() else math.inf


def read_reduced_tree(fh) -> ReducedTree:
    """Inverse of ``ReducedTree.write``; leaves are the childless nodes in id order."""
    lines = [ln.split() for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise PreconditionError("empty reduced-tree file")
    k = int(lines[0][0])
    rows = lines[1:]
    parent = np.full(len(rows) + 1, -1, dtype=np.int64)
    length = np.zeros(len(rows) + 1)
    for eid, p, c, ln in rows:
        if int(eid) != int(c):
            raise PreconditionError("edge id must equal its child node")
        parent[int(c)] = int(p)
        length[int(c)] = float(ln)
    has_child = np.zeros(parent.shape[0], dtype=bool)
    has_child[parent[1:]] = True
    leaves = np.flatnonzero(~has_child)
    leaves = leaves[leaves > 0]
    if leaves.shape[0] != k:
        raise PreconditionError(f"header says {k} leaves, found {leaves.shape[0]}")
    return ReducedTree(parent, length, leaves)
