"""Re-planting of pointed planar trees and the GW-star measure.

A pointed tree is a planted planar tree together with a vertex v of the
underlying tree.  The transform cuts off the subtree T_v above v, re-plants
what is left at v (the edge from v to its parent becomes the new base edge,
the old base becomes the new point), then hangs the children of v, in their
original order, below the new point.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import TextIO

from .errors import PreconditionError
from .gw_sampler import PlantedTree, RootedTree, enumerate_planar_trees, plant, tree_from_offspring
from .offspring import OffspringLaw

DEFAULT_ENUMERATION_CAP = 6


@dataclass(frozen=True)
class PointedPlantedTree:
    planted: PlantedTree
    point: int

    def __post_init__(self):
        if not 1 <= self.point <= self.planted.n:
            raise PreconditionError("the point must be a vertex of the tree, not the base")

    @property
    def code(self) -> tuple[int, ...]:
        """Breadth-first offspring sequence of the underlying planar tree."""
        return tuple(self.planted.tree.offspring_counts())

    def key(self) -> tuple[tuple[int, ...], int]:
        return self.code, self.point

    def __eq__(self, other):
        if not isinstance(other, PointedPlantedTree):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


def pointed(code, point: int) -> PointedPlantedTree:
    return PointedPlantedTree(plant(tree_from_offspring(code)), point)


def _bfs_relabel(children: dict[int, list[int]], base: int) -> tuple[RootedTree, dict[int, int]]:
    """Breadth-first relabelling of a planted tree given by ordered child lists."""
    (root,) = children[base]
    labels = {root: 1}
    order = [root]
    parents = [0]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for c in children.get(v, ()):
            labels[c] = len(order) + 1
            order.append(c)
            parents.append(labels[v])
    return RootedTree(parents), labels


def replant_transform(p: PointedPlantedTree) -> PointedPlantedTree:
    tree = p.planted.tree
    v = p.point
    if not 1 <= v <= tree.n:
        raise PreconditionError("cannot re-plant at the base")
    kids = {u: list(cs) for u, cs in enumerate(tree.children)}
    parent = {u: int(tree.parent[u - 1]) for u in range(1, tree.n + 1)}
    parent[0] = None
    base = 0

    # path v = u0, u1 = parent(v), ..., base
    path = [v]
    while path[-1] != base:
        path.append(parent[path[-1]])

    new = {u: list(cs) for u, cs in kids.items()}
    new[v] = [path[1]]
    for idx in range(1, len(path)):
        u = path[idx]
        below = path[idx - 1]
        if u == base:
            # the old base becomes the new point and receives T_v
            new[u] = list(kids[v])
        else:
            above = path[idx + 1]
            new[u] = [above if c == below else c for c in kids[u]]
    relabeled, labels = _bfs_relabel(new, v)
    return PointedPlantedTree(plant(relabeled), labels[base])


def generation_sizes(children: dict[int, list[int]], start: int, skip: int | None = None) -> Counter:
    """Number of vertices at each distance from ``start`` walking downwards."""
    gen = Counter()
    frontier = [start]
    d = 0
    while frontier:
        nxt = []
        for u in frontier:
            if u != skip:
                gen[d] += 1
            nxt.extend(children.get(u, ()))
        frontier = nxt
        d += 1
    return gen


def distance_profile_identity(p: PointedPlantedTree) -> bool:
    """Check #{u in planted tree : d(u, v) = k} = Z_{k-1}(replanted remainder) + Z_k(T_v) for k >= 1.

    The count on the left runs over all vertices of the planted tree, base
    included; Z of a planted tree ignores its base.
    """
    tree = p.planted.tree
    v = p.point
    n = tree.n
    children = {u: list(cs) for u, cs in enumerate(tree.children)}
    upper = {u: int(tree.parent[u - 1]) for u in range(1, n + 1)}

    # distances from v over the planted tree (base = 0)
    adj = {u: list(children[u]) for u in range(n + 1)}
    for u in range(1, n + 1):
        adj[u].append(upper[u])
    dist = {v: 0}
    frontier = [v]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    lhs = Counter(d for d in dist.values() if d >= 1)

    # T_v generations, and the remainder re-rooted at v's parent (base v excluded)
    z_sub = generation_sizes(children, v)
    rerooted: dict[int, list[int]] = {}
    path = [v]
    while path[-1] != 0:
        path.append(upper[path[-1]])
    for u in range(n + 1):
        rerooted[u] = list(children[u])
    rerooted[v] = []
    for idx in range(1, len(path)):
        u = path[idx]
        below = path[idx - 1]
        rest = [c for c in children[u] if c != below]
        if u != 0:
            rest.append(path[idx + 1])
        rerooted[u] = rest
    z_rem = generation_sizes(rerooted, path[1]) if len(path) > 1 else Counter()
    for k in set(lhs) | {g + 1 for g in z_rem} | set(g for g in z_sub if g >= 1):
        if k < 1:
            continue
        if lhs.get(k, 0) != z_rem.get(k - 1, 0) + z_sub.get(k, 0):
            return False
    return True


def tree_probability(law: OffspringLaw, code) -> Fraction:
    prob = Fraction(1)
    for c in code:
        prob *= law.exact_pmf(c)
    return prob


def enumerate_gw_star(
    law: OffspringLaw, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> dict[tuple[tuple[int, ...], int], Fraction]:
    """Exact GW-star measure on pointed planar trees with n vertices.

    Every (tree, point) pair gets the GW probability of the tree.  Pairs with
    zero probability are left out.
    """
    if n < 1:
        raise PreconditionError("n must be positive")
    if n > cap:
        raise PreconditionError(f"exhaustive enumeration is capped at n={cap}")
    measure = {}
    for code in enumerate_planar_trees(n):
        prob = tree_probability(law, code)
        if prob == 0:
            continue
        for v in range(1, n + 1):
            measure[(code, v)] = prob
    return measure


def pushforward(measure: dict) -> dict:
    out: dict = {}
    for (code, v), mass in measure.items():
        image = replant_transform(pointed(code, v)).key()
        out[image] = out.get(image, Fraction(0)) + mass
    return out


def write_enumeration(measure: dict, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["tree_code", "point", "probability_num", "probability_den"])
    for (code, v), mass in sorted(measure.items()):
        writer.writerow(["".join(map(str, code)) if max(code) < 10 else "-".join(map(str, code)),
                         v, mass.numerator, mass.denominator])
