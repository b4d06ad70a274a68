"""Grid audits: sufficient conditions versus the exact dominance oracle.

Each sweep walks a parameter grid, keeps the pairs satisfying a
condition's hypotheses, builds the exact marginal measures and asks the
up-set oracle whether the claimed ordering holds. Records are plain dicts
so that the CLI can write them straight to CSV or JSON.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import exact
from .graph import ONE, ZERO, BoundaryCondition, Graph, Region, build_box_bounds, region_from_vertices
from .orderings import (BinaryMeasure, dominance_exact, finite_energy_bounds, fkg_check,
                        holley_check, random_holley_pair, single_site_conditionals,
                        vertex_comparison_condition, rc_comparison_condition, edge_monotonicity_condition)
from .params import ModelParams

A_VALUES = (0.1, 0.3, 0.5, 0.7, 0.9)
P_VALUES = (0.0, 0.2, 0.5, 0.8)
Q_VALUES = (1.0, 1.5, 2.0)

# denser grid (210 points) for statements about a single parameter triple
DENSE_A = (0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95)
DENSE_P = (0.0, 0.15, 0.3, 0.5, 0.7, 0.9)
DENSE_Q = (1.0, 1.25, 1.5, 1.75, 2.0)


def small_regions() -> dict[str, Region]:
    """Regions of Z^2 with at most four interior vertices."""
    return {
        "site": build_box_bounds((0, 0), (0, 0)),
        "domino": build_box_bounds((0, 0), (1, 0)),
        "corner": region_from_vertices([(0, 0), (1, 0), (0, 1)]),
        "square": build_box_bounds((0, 0), (1, 1)),
    }


def small_graphs() -> dict[str, Graph]:
    """Graphs with at most four vertices and five edges."""
    return {
        "K2": Graph.complete(2),
        "P3": Graph.path(3),
        "K3": Graph.complete(3),
        "S3": Graph.star(3),
        "C4": Graph.cycle(4),
        "K4-e": Graph(4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3))),
    }


def param_grid(a_values=A_VALUES, p_values=P_VALUES, q_values=Q_VALUES) -> list[ModelParams]:
    return [ModelParams.from_apq(a, p, q) for a, p, q in itertools.product(a_values, p_values, q_values)]


def dense_grid() -> list[ModelParams]:
    return param_grid(DENSE_A, DENSE_P, DENSE_Q)


@lru_cache(maxsize=4096)
def vertex_binary(target, params: ModelParams, bc: BoundaryCondition | None = None) -> BinaryMeasure:
    return BinaryMeasure.from_distribution(exact.vertex_measure(target, params, bc))


@lru_cache(maxsize=4096)
def edge_binary(graph: Graph, params: ModelParams) -> BinaryMeasure:
    return BinaryMeasure.from_distribution(exact.edge_marginal(exact.drc_measure(graph, params)))


def _record(check, target_name, params1, params2, condition, holds, **extra):
    return {"check": check, "target": target_name,
            "a1": params1.a, "p1": params1.p, "q1": params1.q,
            "a2": params2.a, "p2": params2.p, "q2": params2.q,
            "condition": bool(condition), "dominance": bool(holds), **extra}


def sweep_vertex_comparison(variant: str, regions=None, grid=None, boundaries=(ZERO, ONE)) -> list[dict]:
    """Vertex marginals: condition (variant) => Phi_1 <=st Phi_2, common boundary."""
    regions = small_regions() if regions is None else regions
    grid = param_grid() if grid is None else grid
    out = []
    for name, region in regions.items():
        delta = region.lattice_degree
        for prm1, prm2 in itertools.product(grid, repeat=2):
            if not vertex_comparison_condition(variant, prm1, prm2, delta):
                continue
            for bc in boundaries:
                ok = dominance_exact(vertex_binary(region, prm1, bc), vertex_binary(region, prm2, bc))
                out.append(_record(f"vertex-{variant}", name, prm1, prm2, True, ok, boundary=str(bc)))
    return out


def sweep_boundary_order(regions=None, grid=None) -> list[dict]:
    """ZERO <= kappa <= ONE gives ordered vertex marginals (q in [1, 2])."""
    regions = small_regions() if regions is None else regions
    grid = dense_grid() if grid is None else grid
    out = []
    for name, region in regions.items():
        kappa = BoundaryCondition.free_kappa([i % 2 for i in range(region.n_boundary)])
        chain = [ZERO, kappa, ONE]
        for prm in grid:
            for lo, hi in itertools.combinations(chain, 2):
                ok = dominance_exact(vertex_binary(region, prm, lo), vertex_binary(region, prm, hi))
                out.append(_record("boundary-order", name, prm, prm, True, ok, boundary=f"{lo}<={hi}"))
    return out


def sweep_rc_comparison(variant: str, graphs=None, p1_values=None, grid2=None, q1_values=(1.0, 1.5, 2.0, 3.0)) -> list[dict]:
    """Edge marginals against the random-cluster measure (a1 = 1).

    (a): condition => Y_1 <=st Y_2.  (b): condition => Y_1 >=st Y_2.
    """
    graphs = small_graphs() if graphs is None else graphs
    if p1_values is None:
        p1_values = (0.005, 0.01, 0.02, 0.05) if variant == "a" else (0.1, 0.3, 0.5, 0.7, 0.9)
    if grid2 is None:
        a2 = (0.6, 0.8, 0.95) if variant == "a" else (0.2, 0.5, 0.8)
        p2 = (0.6, 0.8, 0.9) if variant == "a" else (0.1, 0.3, 0.5, 0.7, 0.9)
        grid2 = param_grid(a2, p2, (1.0, 1.5, 2.0, 3.0))
    out = []
    for name, graph in graphs.items():
        delta = graph.max_degree
        for p1, q1 in itertools.product(p1_values, q1_values):
            prm1 = ModelParams.from_apq(1.0, p1, q1)
            for prm2 in grid2:
                if not rc_comparison_condition(variant, prm1, prm2, delta):
                    continue
                m1, m2 = edge_binary(graph, prm1), edge_binary(graph, prm2)
                ok = dominance_exact(m1, m2) if variant == "a" else dominance_exact(m2, m1)
                out.append(_record(f"rc-edge-{variant}", name, prm1, prm2, True, ok))
    return out


def sweep_edge_monotonicity(graphs=None, grid=None) -> list[dict]:
    graphs = small_graphs() if graphs is None else graphs
    grid = param_grid(A_VALUES, (0.2, 0.5, 0.8), Q_VALUES) if grid is None else grid
    out = []
    for name, graph in graphs.items():
        for prm1, prm2 in itertools.product(grid, repeat=2):
            if not edge_monotonicity_condition(prm1, prm2):
                continue
            ok = dominance_exact(edge_binary(graph, prm1), edge_binary(graph, prm2))
            out.append(_record("edge-monotone", name, prm1, prm2, True, ok))
    return out


def nested_pairs() -> list[tuple[str, Region, Region]]:
    return [
        ("B0<B1", build_box_bounds((0, 0), (0, 0)), build_box_bounds((-1, -1), (1, 1))),
        ("domino<square", build_box_bounds((0, 0), (1, 0)), build_box_bounds((0, 0), (1, 1))),
        ("corner<square", region_from_vertices([(0, 0), (1, 0), (0, 1)]), build_box_bounds((0, 0), (1, 1))),
        ("site<corner", build_box_bounds((0, 0), (0, 0)), region_from_vertices([(0, 0), (1, 0), (0, 1)])),
    ]


def sweep_nested_boxes(grid=None) -> list[dict]:
    """ZERO increases and ONE decreases with the region, on common coordinates."""
    grid = dense_grid() if grid is None else grid
    out = []
    for name, small, big in nested_pairs():
        coords = [big.index[x] for x in small.vertices]
        for prm in grid:
            for bc in (ZERO, ONE):
                m_small = vertex_binary(small, prm, bc)
                m_big = vertex_binary(big, prm, bc).restrict(coords)
                ok = dominance_exact(m_small, m_big) if bc is ZERO else dominance_exact(m_big, m_small)
                out.append(_record("nested", name, prm, prm, True, ok, boundary=str(bc)))
    return out


def _drc_binary(target, params, bc, coords):
    dist = exact.drc_measure_with_boundary(target, bc, params) if isinstance(target, Region) \
        else exact.drc_measure(target, params)
    return BinaryMeasure.from_distribution(dist).restrict(coords)


def sweep_full_measure(grid=None) -> list[dict]:
    """Full (psi, omega) measure: increasing cylinder events on <= 5 coordinates.

    Checks monotonicity in a, in p, and in the boundary condition.
    """
    grid = param_grid(A_VALUES, (0.2, 0.5, 0.8), Q_VALUES) if grid is None else grid
    site = build_box_bounds((0, 0), (0, 0))
    domino = build_box_bounds((0, 0), (1, 0))
    n_dom = domino.n_interior
    inner = [n_dom + i for i, e in enumerate(domino.edges) if e[1] < n_dom]
    cases = [("site", site, list(range(5))),
             ("domino", domino, [0, 1] + inner + [n_dom + 1, n_dom + 2]),
             ("P3", Graph.path(3), list(range(5)))]
    out = []
    for name, target, coords in cases:
        bcs = (ZERO, ONE) if isinstance(target, Region) else (None,)
        for prm in grid:
            for bc in bcs:
                base = _drc_binary(target, prm, bc, coords)
                for prm2 in grid:
                    if prm2.q != prm.q or (prm2.a, prm2.p) == (prm.a, prm.p):
                        continue
                    if prm2.a >= prm.a and prm2.p >= prm.p:
                        ok = dominance_exact(base, _drc_binary(target, prm2, bc, coords))
                        out.append(_record("full", name, prm, prm2, True, ok, boundary=str(bc)))
            if isinstance(target, Region):
                ok = dominance_exact(_drc_binary(target, prm, ZERO, coords), _drc_binary(target, prm, ONE, coords))
                out.append(_record("full", name, prm, prm, True, ok, boundary="zero<=one"))
    return out


def finite_energy_audit(region: Region, grid, boundaries=(ZERO, ONE)) -> list[dict]:
    """All single-site open probabilities against the finite-energy bounds."""
    out = []
    for prm in grid:
        lower, upper = finite_energy_bounds(prm, region.lattice_degree)
        for bc in boundaries:
            cond = single_site_conditionals(vertex_binary(region, prm, bc))
            out.append({"a": prm.a, "p": prm.p, "q": prm.q, "boundary": str(bc),
                        "lower": lower, "upper": upper,
                        "min_conditional": float(cond.min()), "max_conditional": float(cond.max()),
                        "inside": bool(cond.min() >= lower - 1e-12 and cond.max() <= upper + 1e-12)})
    return out


def holley_audit(n_pairs: int, n: int, seed: int) -> list[dict]:
    """Random Holley pairs: lattice check, FKG of the lower measure, and the dominance oracle."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pairs):
        mu1, mu2 = random_holley_pair(n, rng)
        h = holley_check(mu1, mu2)
        out.append({"pair": k, "holley": bool(h), "mode": h.mode, "fkg_mu1": bool(fkg_check(mu1)),
                    "dominance": bool(dominance_exact(mu1, mu2)) if h else None})
    return out
