"""Compiled inner loops (disjoint-set sweeps)."""

import numpy as np
from numba import njit


@njit(cache=True)
def _find(uf, x):
    root = x
    while uf[root] != root:
        root = uf[root]
    while uf[x] != root:
        nxt = uf[x]
        uf[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union(uf, rank, a, b):
    if rank[a] < rank[b]:
        a, b = b, a
    uf[b] = a
    if rank[a] == rank[b]:
        rank[a] += 1
    return a


@njit(cache=True)
def cut_tree_sweep(up, order):
    """Rebuild the block genealogy by re-inserting edges in reverse removal order.

    Node ids: leaf i is ``i - 1``; the block split at removal step r is
    ``2n - r``, so the root block [n] is ``2n - 1``.  Returns parent, block
    size and removal step per node (leaves get the step of their removal).
    """
    n = order.shape[0]
    uf = np.arange(n + 1)
    rank = np.zeros(n + 1, dtype=np.int64)
    block = np.full(n + 1, -1, dtype=np.int64)
    parent = np.full(2 * n, -1, dtype=np.int64)
    size = np.zeros(2 * n, dtype=np.int64)
    step = np.zeros(2 * n, dtype=np.int64)
    for r in range(n, 0, -1):
        e = order[r - 1]
        node = 2 * n - r
        a = _find(uf, e)
        b = _find(uf, up[e])
        parent[e - 1] = node
        step[e - 1] = r
        step[node] = r
        s = 1
        if block[a] >= 0:
            parent[block[a]] = node
            s += size[block[a]]
        if block[b] >= 0:
            parent[block[b]] = node
            s += size[block[b]]
        c = _union(uf, rank, a, b)
        block[c] = node
        size[node] = s
    return parent, size, step


@njit(cache=True)
def node_depths(parent):
    m = parent.shape[0]
    depth = np.zeros(m, dtype=np.int64)
    for v in range(m - 2, -1, -1):
        depth[v] = depth[parent[v]] + 1
    return depth


@njit(cache=True)
def marked_cut_count(up, order, marked):
    """Count removals hitting a block that holds at least one marked edge."""
    n = order.shape[0]
    uf = np.arange(n + 1)
    rank = np.zeros(n + 1, dtype=np.int64)
    count = np.zeros(n + 1, dtype=np.int64)
    total = 0
    for r in range(n, 0, -1):
        e = order[r - 1]
        a = _find(uf, e)
        b = _find(uf, up[e])
        c = count[a] + count[b] + marked[e]
        if c > 0:
            total += 1
        root = _union(uf, rank, a, b)
        count[root] = c
    return total


@njit(cache=True)
def leaf_path_integrals(parent, size, step, times, leaf, n):
    """Depth of a leaf and the time-integral of its normalised block size."""
    node = parent[leaf - 1]
    depth = 1
    acc = 0.0
    end = times[step[node] - 1]
    while True:
        p = parent[node]
        start = 0.0 if p < 0 else times[step[p] - 1]
        acc += size[node] * (end - start)
        if p < 0:
            break
        depth += 1
        node = p
        end = start
    return depth, acc / n


@njit(cache=True)
def fragmentation_sweep(parent, length, leaf_weight, mark_edge, mark_rank, edge_nmarks, seg_len, tagged):
    """Heal skeleton cuts from the last mark back to the first.

    Union-find elements are the tree nodes followed by the skeleton segments
    between consecutive marks on each edge.  Row j of the outputs describes
    the components after the first j marks: leaf count, skeleton length and
    a component id for each tagged node.
    """
    nv = parent.shape[0]
    nseg = seg_len.shape[0]
    m = mark_edge.shape[0]
    q = tagged.shape[0]
    seg_base = np.zeros(nv + 1, dtype=np.int64)
    for v in range(nv):
        seg_base[v + 1] = seg_base[v] + (edge_nmarks[v] + 1 if v > 0 else 0)
    tot = nv + nseg
    uf = np.arange(tot)
    rank = np.zeros(tot, dtype=np.int64)
    cnt = np.zeros(tot, dtype=np.int64)
    ln = np.zeros(tot)
    for v in range(nv):
        cnt[v] = leaf_weight[v]
    for s in range(nseg):
        ln[nv + s] = seg_len[s]
    for v in range(1, nv):
        first = nv + seg_base[v]
        last = first + edge_nmarks[v]
        for a, b in ((v, last), (parent[v], first)):
            ra = _find(uf, a)
            rb = _find(uf, b)
            if ra != rb:
                cs = cnt[ra] + cnt[rb]
                ls = ln[ra] + ln[rb]
                c = _union(uf, rank, ra, rb)
                cnt[c] = cs
                ln[c] = ls
    out_cnt = np.zeros((m + 1, q), dtype=np.int64)
    out_len = np.zeros((m + 1, q))
    out_id = np.zeros((m + 1, q), dtype=np.int64)
    for j in range(m, -1, -1):
        for t in range(q):
            r = _find(uf, tagged[t])
            out_cnt[j, t] = cnt[r]
            out_len[j, t] = ln[r]
            out_id[j, t] = r
        if j == 0:
            break
        e = mark_edge[j - 1]
        k = mark_rank[j - 1]
        a = _find(uf, nv + seg_base[e] + k - 1)
        b = _find(uf, nv + seg_base[e] + k)
        ca = cnt[a] + cnt[b]
        la = ln[a] + ln[b]
        c = _union(uf, rank, a, b)
        cnt[c] = ca
        ln[c] = la
    return out_cnt, out_len, out_id


@njit(cache=True)
def second_moment_batch(up, clocks, leaf):
    """Cut depth and modified distance of one leaf for each row of clock times."""
    reps, n = clocks.shape
    depth = np.zeros(reps, dtype=np.int64)
    mod = np.zeros(reps)
    for r in range(reps):
        row = clocks[r]
        order = np.argsort(row, kind="mergesort") + 1
        times = row[order - 1]
        parent, size, step = cut_tree_sweep(up, order)
        d, m = leaf_path_integrals(parent, size, step, times, leaf, n)
        depth[r] = d
        mod[r] = m
    return depth, mod
