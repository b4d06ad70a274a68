"""Exhaustive enumeration of BCP, DRC and coupled measures on small systems.

A *system* is either a plain :class:`Graph` or a :class:`Region` together
with a boundary condition. Enumeration structures (configuration lists and
their sufficient statistics) depend only on the system, so they are cached
and reused across parameter values; weights are then assembled in log
space and normalized once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .clusters import label_clusters, subset_partition_table
from .distribution import FiniteDistribution
from .errors import CapacityError, DomainError, ValidationError
from .graph import ZERO, BoundaryCondition, Graph, Region
from .params import ModelParams

MAX_GRAPH_VERTICES = 6
MAX_GRAPH_EDGES = 8
MAX_THETA = 1 << 16
MAX_SPINS = 1 << 16


@dataclass(frozen=True)
class System:
    """Free vertices ``0..n_free-1`` followed by fixed (boundary) vertices."""

    n_free: int
    n_fixed: int
    edges: tuple[tuple[int, int], ...]
    fixed_open: tuple[bool, ...]
    group: tuple[int, ...]
    is_region: bool = False

    @property
    def n(self) -> int:
        return self.n_free + self.n_fixed

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg[: self.n_free]


def make_system(target, bc: BoundaryCondition | None = None, check_cap: bool = True) -> System:
    if isinstance(target, Graph):
        if bc is not None and bc.kind != "zero":
            raise ValidationError("boundary conditions apply to regions, not plain graphs")
        if check_cap and (target.n > MAX_GRAPH_VERTICES or target.n_edges > MAX_GRAPH_EDGES):
            raise CapacityError(
                f"exact engine capped at {MAX_GRAPH_VERTICES} vertices / {MAX_GRAPH_EDGES} edges")
        return System(target.n, 0, target.edges, (), (-1,) * target.n)
    if isinstance(target, Region):
        bc = ZERO if bc is None else bc
        if bc.kind == "periodic":
            raise DomainError("PERIODIC boundary is only available to the sampler")
        kappa = bc.kappa_for(target)
        wiring = bc.wiring_for(target)
        group = (-1,) * target.n_interior + tuple(int(w) for w in wiring)
        return System(target.n_interior, target.n_boundary, target.edges,
                      tuple(bool(k) for k in kappa), group, True)
    raise ValidationError(f"cannot build a system from {type(target).__name__}")


def _term(count, logfactor: float):
    """count * logfactor with the convention 0 * (+-inf) = 0."""
    count = np.asarray(count)
    if math.isinf(logfactor):
        return np.where(count == 0, 0.0, np.copysign(np.inf, logfactor))
    return count * logfactor


# ---------------------------------------------------------------------------
# compatible pairs theta = (psi, omega)


@dataclass(frozen=True)
class ThetaTable:
    psi: np.ndarray        # (N, n_free)
    omega: np.ndarray      # (N, n_edges)
    n_open: np.ndarray     # |V_psi|, free vertices only
    n_psi_edges: np.ndarray  # |E_psi|
    n_omega: np.ndarray    # |eta(omega)|
    k: np.ndarray          # open clusters meeting V+
    labels: np.ndarray     # (N, n) cluster label per vertex, -1 if closed


def theta_count(system: System) -> int:
    eu = np.array([e[0] for e in system.edges], dtype=np.int64)
    ev = np.array([e[1] for e in system.edges], dtype=np.int64)
    fixed = np.array(system.fixed_open, dtype=bool)
    total = 0
    for psi in itertools.product((False, True), repeat=system.n_free):
        state = np.concatenate([np.array(psi, dtype=bool), fixed])
        total += 1 << int(np.count_nonzero(state[eu] & state[ev])) if len(eu) else 1
    return total


@lru_cache(maxsize=256)
def theta_table(system: System) -> ThetaTable:
    n, m = system.n, system.n_edges
    if system.n_free > 20:
        raise CapacityError("too many free vertices to enumerate")
    count = theta_count(system)
    if count > MAX_THETA:
        raise CapacityError(f"{count} compatible pairs exceed the limit {MAX_THETA}")
    eu = np.array([e[0] for e in system.edges], dtype=np.int64)
    ev = np.array([e[1] for e in system.edges], dtype=np.int64)
    fixed = np.array(system.fixed_open, dtype=bool)
    group = np.array(system.group, dtype=np.int64)
    psis, omegas, labels_out = [], [], []
    for psi in itertools.product((0, 1), repeat=system.n_free):
        state = np.concatenate([np.array(psi, dtype=bool), fixed])
        allowed = np.flatnonzero(state[eu] & state[ev]) if m else np.zeros(0, dtype=np.int64)
        for bits in itertools.product((0, 1), repeat=len(allowed)):
            omega = np.zeros(m, dtype=np.bool_)
            omega[allowed[np.array(bits, dtype=bool)]] = True
            labels_out.append(label_clusters(n, eu, ev, omega, state, group))
            psis.append(psi)
            omegas.append(omega)
    N = len(psis)
    psi_arr = np.array(psis, dtype=np.int64).reshape(N, system.n_free)
    omega_arr = np.array(omegas, dtype=np.int64).reshape(N, m)
    labels = np.array(labels_out, dtype=np.int64).reshape(N, n)
    state_all = np.concatenate([psi_arr.astype(bool), np.broadcast_to(fixed, (len(psi_arr), system.n_fixed))], axis=1)
    n_psi_edges = (state_all[:, eu] & state_all[:, ev]).sum(axis=1) if m else np.zeros(len(psi_arr), dtype=np.int64)
    k = np.array([len(np.unique(row[row >= 0])) for row in labels], dtype=np.int64)
    table = ThetaTable(psi_arr, omega_arr, psi_arr.sum(axis=1), n_psi_edges, omega_arr.sum(axis=1), k, labels)
    for arr in (table.psi, table.omega, table.labels):
        arr.setflags(write=False)
    return table


def enumerate_theta(graph: Graph) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All compatible pairs (psi, omega), lexicographically ordered."""
    t = theta_table(make_system(graph))
    return [(tuple(map(int, p)), tuple(map(int, o))) for p, o in zip(t.psi, t.omega)]


def _drc_log_weights(t: ThetaTable, params: ModelParams) -> np.ndarray:
    logw = (_term(t.n_psi_edges, params.log_r) + t.k * params.log_q
            + _term(t.n_omega, params.log_edge_ratio))
    if params.a == 1.0:
        logw = logw + np.where(t.psi.all(axis=1), 0.0, -np.inf)
    else:
        logw = logw + t.n_open * params.log_vertex_ratio
    return logw


def _drc(system: System, params: ModelParams, meta: dict) -> FiniteDistribution:
    t = theta_table(system)
    dist = FiniteDistribution(np.concatenate([t.psi, t.omega], axis=1), _drc_log_weights(t, params),
                              [("psi", system.n_free), ("omega", system.n_edges)], meta)
    dist.table = t
    dist.system = system
    return dist


def drc_measure(graph: Graph, params: ModelParams) -> FiniteDistribution:
    """Diluted random-cluster measure on a finite graph (no boundary)."""
    meta = {"model": "drc", **params.as_dict(), "random_cluster_specialization": params.a == 1.0}
    return _drc(make_system(graph), params, meta)


def drc_measure_with_boundary(region: Region, bc: BoundaryCondition,
                              params: ModelParams) -> FiniteDistribution:
    """DRC measure on a region with boundary condition ``bc``.

    Columns: psi over V, omega over every edge of E. Clusters joined
    through an open exterior count once.
    """
    meta = {"model": "drc", "boundary": str(bc), **params.as_dict()}
    return _drc(make_system(region, bc), params, meta)


def vertex_marginal(dist: FiniteDistribution) -> FiniteDistribution:
    return dist.marginal(["psi"])


def edge_marginal(dist: FiniteDistribution) -> FiniteDistribution:
    return dist.marginal(["omega"])


def vertex_measure(target, params: ModelParams, bc: BoundaryCondition | None = None) -> FiniteDistribution:
    """Vertex marginal computed as r^|E_psi| (a/(1-a))^|V_psi| Z^RC(Lambda(psi)).

    Independent of the theta enumeration: random-cluster partition
    functions of all induced subgraphs come from one subset recursion, so
    regions far beyond the enumeration cap are reachable.
    """
    system = make_system(target, bc, check_cap=False)
    nf = system.n_free
    # node per free vertex, then one node per open boundary class
    classes = sorted({g for g, o in zip(system.group[nf:], system.fixed_open) if o})
    node_of = list(range(nf)) + [nf + classes.index(g) if o else -1
                                 for g, o in zip(system.group[nf:], system.fixed_open)]
    n_nodes = nf + len(classes)
    edges = []
    for u, v in system.edges:
        a, b = node_of[u], node_of[v]
        if a < 0 or b < 0 or a == b:
            continue
        edges.append((a, b))
    # parallel edges are allowed here, so build the multiplicity matrix directly
    Zsub, ecount = _subset_table(n_nodes, edges, params)
    psi = np.array(list(itertools.product((0, 1), repeat=nf)), dtype=np.int64).reshape(-1, nf)
    cls_bits = sum(1 << (nf + i) for i in range(len(classes)))
    masks = (psi << np.arange(nf)).sum(axis=1) + cls_bits
    n_open = psi.sum(axis=1)
    with np.errstate(divide="ignore"):
        logw = _term(ecount[masks], params.log_r) + np.log(Zsub[masks])
    if params.a == 1.0:
        logw = logw + np.where(n_open == nf, 0.0, -np.inf)
    else:
        logw = logw + n_open * params.log_vertex_ratio
    meta = {"model": "vertex", "boundary": str(bc or ZERO), **params.as_dict()}
    return FiniteDistribution(psi, logw, [("psi", nf)], meta)


def _subset_table(n_nodes: int, edges, params: ModelParams):
    from .clusters import MAX_RC_SUBSET_NODES, _subset_partition

    if n_nodes > MAX_RC_SUBSET_NODES:
        raise CapacityError(f"vertex measure limited to {MAX_RC_SUBSET_NODES} nodes")
    mult = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    for a, b in edges:
        mult[a, b] += 1
        mult[b, a] += 1
    return _subset_partition(n_nodes, mult, params.edge_ratio, float(params.q))


def rc_partition_on(target, psi, p: float, q: float, bc: BoundaryCondition | None = None) -> float:
    """Z^RC of the open subgraph Lambda(psi), boundary classes wired per ``bc``."""
    from .clusters import rc_partition
    from .graph import induced_open_subgraph

    psi = np.asarray(psi, dtype=bool)
    if isinstance(target, Region):
        sub = induced_open_subgraph(target, psi, bc or ZERO)
        wiring = _wiring_groups(target, bc or ZERO, sub)
    else:
        keep = np.flatnonzero(psi)
        relabel = {int(v): i for i, v in enumerate(keep)}
        sub = Graph(len(keep), tuple((relabel[u], relabel[v]) for u, v in target.edges
                                     if psi[u] and psi[v]))
        wiring = None
    return rc_partition(sub, p, q, wiring=wiring)


def projected_vertex_weight(target, psi, params: ModelParams, bc: BoundaryCondition | None = None) -> float:
    """Unnormalized r^|E_psi| (a/(1-a))^|V_psi| Z^RC_lambda(Lambda(psi)) for one psi."""
    from .graph import induced_open_subgraph

    psi = np.asarray(psi, dtype=bool)
    if isinstance(target, Region):
        n_e = induced_open_subgraph(target, psi, bc or ZERO).n_edges
    else:
        n_e = sum(1 for u, v in target.edges if psi[u] and psi[v])
    z = rc_partition_on(target, psi, params.p, params.q, bc)
    if params.a == 1.0:
        return params.r ** n_e * z if psi.all() else 0.0
    return params.r ** n_e * params.vertex_ratio ** int(psi.sum()) * z


def _wiring_groups(region: Region, bc: BoundaryCondition, sub: Graph):
    if not bc.wired:
        return None
    comp = dict(zip(region.boundary, region.external_components))
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(sub.labels):
        if lab in comp:
            groups.setdefault(comp[lab], []).append(i)
    return list(groups.values())


# ---------------------------------------------------------------------------
# spin measures


@dataclass(frozen=True)
class SpinTable:
    sigma: np.ndarray      # (N, n_free) spins of the free vertices
    n_nonzero_edges: np.ndarray   # |E_sigma|
    n_agree: np.ndarray    # sum_e delta_e(sigma)
    n_zero: np.ndarray     # free vertices with spin 0


@lru_cache(maxsize=256)
def spin_table(system: System, q: int, s: int) -> SpinTable:
    nf = system.n_free
    if (q + 1) ** nf > MAX_SPINS:
        raise CapacityError(f"{(q + 1) ** nf} spin configurations exceed the limit {MAX_SPINS}")
    sigma = np.array(list(itertools.product(range(q + 1), repeat=nf)), dtype=np.int64).reshape(-1, nf)
    full = np.concatenate([sigma, np.full((len(sigma), system.n_fixed), s, dtype=np.int64)], axis=1)
    if system.n_edges:
        eu = np.array([e[0] for e in system.edges])
        ev = np.array([e[1] for e in system.edges])
        su, sv = full[:, eu], full[:, ev]
        nonzero = (su != 0) & (sv != 0)
        n_nz = nonzero.sum(axis=1)
        n_agree = (nonzero & (su == sv)).sum(axis=1)
    else:
        n_nz = n_agree = np.zeros(len(sigma), dtype=np.int64)
    table = SpinTable(sigma, n_nz, n_agree, (sigma == 0).sum(axis=1))
    table.sigma.setflags(write=False)
    return table


def _bcp(system: System, K: float, Delta: float, q, s: int, meta: dict) -> FiniteDistribution:
    if K < 0:
        raise DomainError(f"K={K} must be non-negative")
    if q != int(q) or q < 1:
        raise DomainError(f"BCP measure needs integer q >= 1, got {q}")
    t = spin_table(system, int(q), s)
    logw = -K * t.n_nonzero_edges + 2 * K * t.n_agree + _term(t.n_zero, Delta)
    dist = FiniteDistribution(t.sigma, logw, [("sigma", system.n_free)], meta)
    dist.table = t
    dist.system = system
    return dist


def bcp_measure(graph: Graph, K: float, Delta: float, q: int) -> FiniteDistribution:
    """Blume-Capel-Potts measure on spins {0, ..., q}^V."""
    return _bcp(make_system(graph), K, Delta, q, 0,
                {"model": "bcp", "K": K, "Delta": Delta, "q": q})


def bcp_measure_with_boundary(region: Region, s: int, K: float, Delta: float, q: int) -> FiniteDistribution:
    """BCP measure on (V+, E) with every boundary spin fixed to ``s`` (s = 0 is free)."""
    if not (0 <= s <= q):
        raise DomainError(f"boundary spin s={s} outside 0..{q}")
    bc = ZERO if s == 0 else BoundaryCondition("one")
    return _bcp(make_system(region, bc), K, Delta, q, s,
                {"model": "bcp", "K": K, "Delta": Delta, "q": q, "s": s})


def coupling_measure(target, K: float, Delta: float, q: int, s: int = 0) -> FiniteDistribution:
    """Joint measure on (sigma, psi, omega) whose marginals are BCP and DRC.

    Support: psi_x = [sigma_x != 0], omega_e = 0 unless both endpoint spins
    agree and are nonzero. For a region, boundary spins are fixed to ``s``.
    """
    params = ModelParams.from_kdelta(K, Delta, q)
    qi = params.integer_q
    if isinstance(target, Region):
        bc = ZERO if s == 0 else BoundaryCondition("one")
        system = make_system(target, bc)
    else:
        system = make_system(target)
    spins = spin_table(system, qi, s)
    nf, m = system.n_free, system.n_edges
    eu = np.array([e[0] for e in system.edges], dtype=np.int64)
    ev = np.array([e[1] for e in system.edges], dtype=np.int64)
    sigma = spins.sigma
    full = np.concatenate([sigma, np.full((len(sigma), system.n_fixed), s, dtype=np.int64)], axis=1)
    psi = (sigma != 0).astype(np.int64)
    open_v = full != 0
    n_epsi = (open_v[:, eu] & open_v[:, ev]).sum(axis=1)
    agree = (full[:, eu] == full[:, ev]) & open_v[:, eu]
    base = _term(n_epsi, params.log_r).astype(float)
    if params.a == 1.0:
        base = base + np.where(psi.all(axis=1), 0.0, -np.inf)
    else:
        base = base + psi.sum(axis=1) * params.log_vertex_ratio
    # every omega in lexicographic order; keep those inside the agreeing edges
    omegas = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64).reshape(2**m, m)
    w_sizes = omegas.sum(axis=1)
    w_term = _term(w_sizes, params.log_edge_ratio).astype(float)
    rows_i, rows_w = [], []
    step = max(1, 2**20 // max(len(omegas) * max(m, 1), 1))
    for lo in range(0, len(sigma), step):
        blk = agree[lo:lo + step]
        ok = ~np.any(omegas[None, :, :].astype(bool) & ~blk[:, None, :], axis=2)
        i, j = np.nonzero(ok)
        rows_i.append(i + lo)
        rows_w.append(j)
    ii, jj = np.concatenate(rows_i), np.concatenate(rows_w)
    configs = np.concatenate([sigma[ii], psi[ii], omegas[jj]], axis=1)
    logw = base[ii] + w_term[jj]
    meta = {"model": "coupling", "K": K, "Delta": Delta, "q": q, "s": s}
    return FiniteDistribution(configs, logw, [("sigma", nf), ("psi", nf), ("omega", m)], meta)


# ---------------------------------------------------------------------------
# correlations, partition functions, derivatives


def two_point(graph: Graph, K: float, Delta: float, q: int, x: int, y: int) -> float:
    """tau_q(x, y) = P(sigma_x = sigma_y != 0) - P(sigma_x sigma_y != 0) / q."""
    dist = bcp_measure(graph, K, Delta, q)
    sx, sy = dist.configs[:, x], dist.configs[:, y]
    both = (sx != 0) & (sy != 0)
    return dist.prob(both & (sx == sy)) - dist.prob(both) / q


def connectivity(dist: FiniteDistribution, x: int, y: int) -> float:
    """P(x <-> y) under a DRC table from :func:`drc_measure` (x <-> x means x open)."""
    labels = dist.table.labels
    return dist.prob((labels[:, x] >= 0) & (labels[:, x] == labels[:, y]))


def ising_map(params: ModelParams, degrees) -> tuple[float, np.ndarray]:
    """Ising couplings of the q = 1 model: J = K/4, h_x = (K deg_x - 2 Delta)/4."""
    degrees = np.asarray(degrees, dtype=float)
    J = params.K / 4.0
    h = (params.K * degrees - 2.0 * params.Delta) / 4.0
    return J, h


def ising_inverse(J: float, h: float, d: int) -> ModelParams:
    """(a, p) for the q = 1 model on a periodic d-dimensional box with Ising (J, h)."""
    K = 4.0 * J
    return ModelParams.from_kdelta(K, K * d - 2.0 * h, 1)


def log_partition(target, params: ModelParams, bc: BoundaryCondition | None = None) -> float:
    """log Z^DRC computed by enumeration."""
    return _drc(make_system(target, bc), params, {}).log_total


def log_partition_derivatives(target, params: ModelParams,
                              bc: BoundaryCondition | None = None) -> tuple[float, float]:
    """(d log Z / d Delta, d log Z / d K) as DRC expectations.

    d/dDelta = -E|V_psi| and d/dK = E[-|E_psi| + (2/p) |eta(omega)|].
    """
    if params.p == 0.0:
        raise DomainError("the K-derivative identity needs p > 0")
    dist = _drc(make_system(target, bc), params, {})
    t = dist.table
    d_delta = -dist.expect(t.n_open)
    d_k = dist.expect(-t.n_psi_edges + (2.0 / params.p) * t.n_omega)
    return d_delta, d_k


def open_count_variance(target, params: ModelParams, bc: BoundaryCondition | None = None) -> float:
    """var(|V_psi|), the second Delta-derivative of log Z."""
    dist = _drc(make_system(target, bc), params, {})
    n = dist.table.n_open
    mean = dist.expect(n)
    return dist.expect((n - mean) ** 2)
