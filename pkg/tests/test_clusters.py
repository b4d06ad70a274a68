import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracle import rc_partition as rc_oracle
from bcpdrc.clusters import UnionFind, count_clusters, label_clusters, rc_partition
from bcpdrc.graph import Graph, build_box


def test_union_find_basics():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    assert uf.connected(0, 1) and not uf.connected(1, 3)
    root = uf.find(0)
    assert uf.find(root) == root
    assert uf.components() == [[0, 1], [2], [3, 4]]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.data())
def test_labels_match_networkx(n, data):
    pairs = list(itertools.combinations(range(n), 2))
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=10))
    vopen = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    eopen = np.array([vopen[u] and vopen[v] and data.draw(st.booleans()) for u, v in edges], dtype=bool)
    g = nx.Graph()
    g.add_nodes_from(np.flatnonzero(vopen).tolist())
    g.add_edges_from(e for e, w in zip(edges, eopen) if w)
    assert count_clusters(n, edges, vopen, eopen) == nx.number_connected_components(g)
    eu = np.array([e[0] for e in edges], dtype=np.int64)
    ev = np.array([e[1] for e in edges], dtype=np.int64)
    labels = label_clusters(n, eu, ev, eopen, vopen, -np.ones(n, dtype=np.int64))
    for comp in nx.connected_components(g):
        assert {labels[x] for x in comp} == {min(comp)}
    assert all(labels[x] == -1 for x in range(n) if not vopen[x])


def test_groups_merge_clusters():
    n = 4
    assert count_clusters(n, [], np.ones(n), [], groups=[0, 0, -1, 1]) == 3


def test_rc_single_vertex():
    assert rc_partition(Graph(1, ()), 0.37, 2.5) == pytest.approx(2.5)


def test_rc_k2():
    assert rc_partition(Graph.complete(2), 0.5, 2) == pytest.approx(6.0)
    assert rc_partition(Graph.complete(2), 0.5, 1) == pytest.approx(2.0)
    assert rc_partition(Graph.complete(2), 0.5, 2, method="subsets") == pytest.approx(6.0)


@pytest.mark.parametrize("graph", [Graph.complete(4), Graph.cycle(5), Graph.star(3), Graph.path(4)])
@pytest.mark.parametrize("p,q", [(0.3, 1.0), (0.5, 2.0), (0.8, 1.5)])
def test_rc_methods_agree_with_oracle(graph, p, q):
    ref = rc_oracle(graph.n, graph.edges, p, q)
    assert rc_partition(graph, p, q, method="enumerate") == pytest.approx(ref, rel=1e-12)
    assert rc_partition(graph, p, q, method="subsets") == pytest.approx(ref, rel=1e-10)


def test_rc_wiring_on_box():
    box = build_box(2, 0)
    g = box.graph_plus()
    wiring = [list(range(1, 5))]
    # merge the wired boundary into one node: a multigraph with 4 parallel edges
    v = 1.0
    q = 2.0
    expected = sum(math.comb(4, k) * v ** k * (q if k else q * q) for k in range(5))
    assert rc_partition(g, 0.5, q, wiring=wiring) == pytest.approx(expected)
    assert rc_partition(g, 0.5, q, wiring=wiring, method="subsets") == pytest.approx(expected)
