"""Brute-force reference implementations used only by the tests.

These deliberately share no code with the package: clusters come from
networkx and weights are evaluated straight from their defining formulas.
"""

import itertools
import math

import networkx as nx


def drc_weights(n, edges, a, p, q, groups=None, fixed_open=()):
    """{(psi, omega): weight} for free vertices 0..n-1 plus fixed open vertices.

    ``fixed_open`` lists extra vertex ids (>= n) that are always open;
    ``groups`` lists sets of vertices merged into one cluster.
    """
    r = math.sqrt(1 - p)
    out = {}
    for psi in itertools.product((0, 1), repeat=n):
        is_open = lambda x: x in fixed_open if x >= n else psi[x] == 1
        e_psi = [e for e in edges if is_open(e[0]) and is_open(e[1])]
        for omega in itertools.product((0, 1), repeat=len(edges)):
            if any(w and not (is_open(u) and is_open(v)) for w, (u, v) in zip(omega, edges)):
                continue
            g = nx.Graph()
            g.add_nodes_from([x for x in range(n) if psi[x]] + list(fixed_open))
            g.add_edges_from(e for w, e in zip(omega, edges) if w)
            for grp in groups or ():
                grp = [x for x in grp if x in g]
                g.add_edges_from(zip(grp, grp[1:]))
            k = nx.number_connected_components(g)
            nv = sum(psi)
            if a == 1:
                va = 1.0 if nv == n else 0.0
            else:
                va = (a / (1 - a)) ** nv
            out[(psi, omega)] = r ** len(e_psi) * q ** k * va * (p / (1 - p)) ** sum(omega)
    return out


def bcp_weights(n, edges, K, Delta, q, fixed=None):
    """{sigma: weight}; ``fixed`` maps extra vertex ids to fixed spins."""
    fixed = fixed or {}
    out = {}
    for sigma in itertools.product(range(q + 1), repeat=n):
        s = {**dict(enumerate(sigma)), **fixed}
        e_sig = sum(1 for u, v in edges if s[u] and s[v])
        agree = sum(1 for u, v in edges if s[u] and s[u] == s[v])
        zeros = sum(1 for x in sigma if x == 0)
        out[sigma] = math.exp(-K * e_sig + 2 * K * agree + Delta * zeros)
    return out


def rc_partition(n, edges, p, q):
    total = 0.0
    for omega in itertools.product((0, 1), repeat=len(edges)):
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(e for w, e in zip(omega, edges) if w)
        total += q ** nx.number_connected_components(g) * (p / (1 - p)) ** sum(omega)
    return total


def connected_graphs(max_vertices=4, max_edges=5):
    """All labelled connected graphs on 1..max_vertices vertices with <= max_edges edges."""
    graphs = []
    for n in range(1, max_vertices + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for m in range(0, min(len(pairs), max_edges) + 1):
            for edges in itertools.combinations(pairs, m):
                g = nx.Graph()
                g.add_nodes_from(range(n))
                g.add_edges_from(edges)
                if nx.is_connected(g):
                    graphs.append((n, edges))
    return graphs
