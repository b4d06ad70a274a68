"""Cluster bookkeeping: union-find and the random-cluster partition function.

The union-find primitives are numba-compiled so that the sampler can call
them inside its sweep kernel; :class:`UnionFind` wraps the same arrays for
ordinary Python use.
"""

from __future__ import annotations

import itertools

import numba
import numpy as np

from .errors import CapacityError
from .graph import Graph

MAX_RC_EDGES_ENUM = 20
MAX_RC_SUBSET_NODES = 20


@numba.njit(cache=True)
def uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def uf_union(parent, rank, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return ra
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return ra


@numba.njit(cache=True)
def label_clusters(n, eu, ev, edge_open, vertex_open, group):
    """Label clusters of the open subgraph.

    Vertices with equal non-negative ``group`` ids are merged up front
    (boundary wiring). Returns one label per vertex: the smallest vertex
    index in its cluster, or -1 for closed vertices.
    """
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    first = -np.ones(n + 1, dtype=np.int64)
    for x in range(n):
        g = group[x]
        if g >= 0 and vertex_open[x]:
            if first[g] < 0:
                first[g] = x
            else:
                uf_union(parent, rank, first[g], x)
    for e in range(eu.shape[0]):
        if edge_open[e]:
            uf_union(parent, rank, eu[e], ev[e])
    labels = -np.ones(n, dtype=np.int64)
    smallest = -np.ones(n, dtype=np.int64)
    for x in range(n):
        if vertex_open[x]:
            r = uf_find(parent, x)
            if smallest[r] < 0:
                smallest[r] = x
            labels[x] = smallest[r]
    return labels


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int64)

    def __len__(self):
        return len(self.parent)

    def find(self, x: int) -> int:
        return int(uf_find(self.parent, x))

    def union(self, a: int, b: int) -> int:
        return int(uf_union(self.parent, self.rank, a, b))

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def components(self, members=None) -> list[list[int]]:
        """Components restricted to ``members`` (default: all), ordered by smallest element."""
        members = range(len(self)) if members is None else sorted(members)
        groups: dict[int, list[int]] = {}
        for x in members:
            groups.setdefault(self.find(x), []).append(x)
        return sorted(groups.values(), key=lambda g: g[0])


def count_clusters(n: int, edges, open_vertices, open_edges, groups=None) -> int:
    """Number of clusters of (open vertices, open edges), wiring ``groups`` merged."""
    eu = np.array([e[0] for e in edges], dtype=np.int64)
    ev = np.array([e[1] for e in edges], dtype=np.int64)
    group = -np.ones(n, dtype=np.int64) if groups is None else np.asarray(groups, dtype=np.int64)
    labels = label_clusters(n, eu, ev, np.asarray(open_edges, dtype=np.bool_),
                            np.asarray(open_vertices, dtype=np.bool_), group)
    return len(set(labels[labels >= 0].tolist()))


# ---------------------------------------------------------------------------
# random-cluster partition function


@numba.njit(cache=True)
def _subset_partition(n, mult, v, q):
    """Z^RC of the induced subgraph on every vertex subset S (bitmask index).

    ``mult[i, j]`` counts parallel edges. Uses the connected-part
    recursion: with s the lowest vertex of S,
    C(S) = F(S) - sum_{s in T < S} C(T) F(S\\T),  Z(S) = q sum_{s in T <= S} C(T) Z(S\\T),
    where F(S) = (1 + v)^{e(S)}.
    """
    size = 1 << n
    ecount = np.zeros(size, dtype=np.int64)
    for S in range(1, size):
        low = S & (-S)
        i = 0
        while (1 << i) != low:
            i += 1
        rest = S ^ low
        c = ecount[rest]
        for j in range(n):
            if (rest >> j) & 1:
                c += mult[i, j]
        ecount[S] = c
    F = np.empty(size)
    for S in range(size):
        F[S] = (1.0 + v) ** ecount[S]
    C = np.zeros(size)
    Z = np.zeros(size)
    Z[0] = 1.0
    for S in range(1, size):
        low = S & (-S)
        R = S ^ low
        c = F[S]
        U = (R - 1) & R
        while True:
            if U == R:
                break
            T = low | U
            c -= C[T] * F[S ^ T]
            if U == 0:
                break
            U = (U - 1) & R
        C[S] = c
        z = 0.0
        U = R
        while True:
            T = low | U
            z += C[T] * Z[S ^ T]
            if U == 0:
                break
            U = (U - 1) & R
        Z[S] = q * z
    return Z, ecount


def _contract(graph: Graph, wiring) -> tuple[int, np.ndarray]:
    """Merge wired vertex groups into single nodes; returns (n_nodes, multiplicity matrix)."""
    node = list(range(graph.n))
    if wiring:
        for group in wiring:
            group = sorted(group)
            for x in group[1:]:
                node[x] = group[0]
    ids = {v: i for i, v in enumerate(sorted(set(node)))}
    node = [ids[v] for v in node]
    m = len(ids)
    mult = np.zeros((m, m), dtype=np.int64)
    loops = 0
    for u, v in graph.edges:
        a, b = node[u], node[v]
        if a == b:
            loops += 1
        else:
            mult[a, b] += 1
            mult[b, a] += 1
    return m, mult, loops, node


def subset_partition_table(graph: Graph, p: float, q: float, wiring=None):
    """``Z^RC`` for every subset of (contracted) nodes, plus edge counts.

    Returns ``(Z, ecount, node_of_vertex, loops)`` where ``Z`` is indexed by
    node bitmasks. Edges inside a wired group are returned as ``loops``:
    they never change the cluster count.
    """
    m, mult, loops, node = _contract(graph, wiring)
    if m > MAX_RC_SUBSET_NODES:
        raise CapacityError(f"subset recursion limited to {MAX_RC_SUBSET_NODES} nodes, got {m}")
    v = p / (1.0 - p)
    Z, ecount = _subset_partition(m, mult, v, float(q))
    return Z, ecount, node, loops


def rc_partition(graph: Graph, p: float, q: float, wiring=None, method: str = "auto") -> float:
    """Random-cluster partition function ``sum_w q^k(w) (p/(1-p))^|w|``.

    ``wiring`` lists vertex groups deemed connected off the graph (a
    boundary condition); each group then counts as one cluster. With no
    edges the result is ``q^(number of components)``.
    """
    if method == "auto":
        method = "enumerate" if graph.n_edges <= 6 or graph.n > MAX_RC_SUBSET_NODES else "subsets"
    if method == "enumerate":
        return _rc_partition_enum(graph, p, q, wiring)
    if method == "subsets":
        Z, _, _, loops = subset_partition_table(graph, p, q, wiring)
        return float(Z[-1]) * (1.0 / (1.0 - p)) ** loops
    raise ValueError(f"unknown method {method!r}")


def _rc_partition_enum(graph: Graph, p: float, q: float, wiring=None) -> float:
    m = graph.n_edges
    if m > MAX_RC_EDGES_ENUM:
        raise CapacityError(f"edge enumeration limited to {MAX_RC_EDGES_ENUM} edges, got {m}")
    group = -np.ones(graph.n, dtype=np.int64)
    for g, members in enumerate(wiring or ()):
        group[list(members)] = g
    eu = graph.edge_array[:, 0].copy()
    ev = graph.edge_array[:, 1].copy()
    vopen = np.ones(graph.n, dtype=np.bool_)
    v = p / (1.0 - p)
    total = 0.0
    for bits in itertools.product((0, 1), repeat=m):
        w = np.array(bits, dtype=np.bool_)
        labels = label_clusters(graph.n, eu, ev, w, vopen, group)
        k = len(set(labels.tolist()))
        total += q ** k * v ** int(w.sum())
    return total
