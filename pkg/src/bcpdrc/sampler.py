"""Monte Carlo for the BCP measure through its coupling with the DRC model.

One sweep is a heat-bath pass over the free sites followed by a cluster
step (spins -> bonds -> spins). The cluster step alone cannot move a site
between spin 0 and the nonzero spins, hence the heat-bath pass.

Random-number contract
----------------------
Each chain owns a ``numpy.random.Generator`` (PCG64) seeded from a
``SeedSequence``. Sweep ``t`` consumes exactly one block of ``B`` doubles
from ``Generator.random`` laid out as

* ``n_free`` heat-bath uniforms, used in visiting order;
* ``n_free`` permutation keys (random order only; sites visited by argsort);
* one uniform per edge for the bond step (edge order of the lattice);
* one uniform per vertex for cluster spins; a cluster takes the uniform of
  its union-find root ``r`` and gets spin ``1 + floor(u_r q)``.

Blocks are drawn in chunks, which yields the same stream as drawing them
one at a time, so a run can be stopped, checkpointed and resumed exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .clusters import uf_find, uf_union
from .errors import BCPError, DomainError, ValidationError
from .graph import ONE, PERIODIC, ZERO, BoundaryCondition, Graph, Region, build_box, torus_graph
from .params import ModelParams

CHECKPOINT_VERSION = 1
OBSERVABLES = ("open_vertex_density", "open_edge_density", "largest_open_cluster",
               "origin_to_boundary", "largest_closed_cluster", "tau_spin", "tau_conn",
               "origin_open", "boundary_tau_spin")
N_OBS = len(OBSERVABLES)


@dataclass(frozen=True)
class Lattice:
    """Sampler view of a graph: free sites first, then sites with fixed spin.

    ``target`` marks the sites that count as "the boundary" for the
    origin-to-boundary observable; ``inner_edge`` marks the edges used for
    the open-edge density.
    """

    n_free: int
    n_fixed: int
    edges: np.ndarray
    fixed_spin: int
    target: np.ndarray
    inner_edge: np.ndarray
    origin: int
    point: int
    description: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def n(self) -> int:
        return self.n_free + self.n_fixed

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def csr(self):
        n = self.n
        deg = np.zeros(n + 1, dtype=np.int64)
        for u, v in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        indptr = np.cumsum(deg)
        indices = np.empty(indptr[-1], dtype=np.int64)
        fill = indptr[:-1].copy()
        for u, v in self.edges:
            indices[fill[u]] = v
            fill[u] += 1
            indices[fill[v]] = u
            fill[v] += 1
        return indptr, indices

    def block_size(self, random_order: bool) -> int:
        return self.n_free * (2 if random_order else 1) + self.n_edges + self.n


def lattice_from_graph(graph: Graph, origin: int = 0, point: int | None = None) -> Lattice:
    point = (1 if graph.n > 1 else 0) if point is None else point
    return Lattice(graph.n, 0, np.array(graph.edges, dtype=np.int64).reshape(-1, 2), 0,
                   np.zeros(graph.n, dtype=bool), np.ones(graph.n_edges, dtype=bool),
                   origin, point, {"kind": "graph", "n": graph.n, "edges": [list(e) for e in graph.edges]})


def lattice_from_region(region: Region, s: int, point=None) -> Lattice:
    """Region with boundary spins fixed to ``s`` (s = 0: free boundary)."""
    nv = region.n_interior
    d = region.dim
    origin = region.index.get((0,) * d, 0)
    if point is None:
        coords = region.coordinates()
        radius = int(np.max(np.abs(coords))) if len(coords) else 0
        point = region.index.get((max(radius // 2, 1),) + (0,) * (d - 1), origin)
    elif not isinstance(point, int):
        point = region.index[tuple(point)]
    if s > 0:
        target = np.zeros(region.n_closure, dtype=bool)
        target[nv:] = True
    else:
        # free boundary: "reaching the boundary" means reaching the outer layer of V
        target = np.zeros(region.n_closure, dtype=bool)
        outer = {u for u, v in region.edges if v >= nv}
        target[list(outer)] = True
    edges = np.array(region.edges, dtype=np.int64).reshape(-1, 2)
    return Lattice(nv, region.n_boundary, edges, int(s), target, edges[:, 1] < nv, origin, point,
                   {"kind": "region", "dim": d, "box": region.box, "s": int(s)})


def lattice_from_torus(d: int, n: int) -> Lattice:
    g = torus_graph(d, n)
    index = {x: i for i, x in enumerate(g.labels)}
    origin = index[(0,) * d]
    point = index[(max(n // 2, 1),) + (0,) * (d - 1)]
    target = np.array([max(abs(c) for c in x) == n for x in g.labels], dtype=bool)
    return Lattice(g.n, 0, np.array(g.edges, dtype=np.int64), 0, target,
                   np.ones(g.n_edges, dtype=bool), origin, point,
                   {"kind": "torus", "dim": d, "n": n})


def make_lattice(d: int, n: int, boundary: BoundaryCondition | str, s: int = 1) -> Lattice:
    """Box [-n, n]^d with ZERO (free), ONE (spins fixed to s) or PERIODIC boundary."""
    if isinstance(boundary, str):
        boundary = BoundaryCondition.parse(boundary)
    if boundary.kind == "periodic":
        return lattice_from_torus(d, n)
    if boundary.kind == "one":
        return lattice_from_region(build_box(d, n), s)
    if boundary.kind == "zero":
        return lattice_from_region(build_box(d, n), 0)
    raise DomainError("the sampler supports ZERO, ONE and PERIODIC boundaries")


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _site_weights(spins, x, indptr, indices, K, Delta, q, out):
    """Conditional law of the spin at x given its neighbours, written to out[0..q]."""
    for s in range(q + 1):
        out[s] = 0.0
    m = 0
    for k in range(indptr[x], indptr[x + 1]):
        t = spins[indices[k]]
        if t != 0:
            m += 1
            out[t] += 1.0
    # log-weights: Delta for 0, -K m + 2K n_s otherwise
    top = Delta
    for s in range(1, q + 1):
        out[s] = -K * m + 2.0 * K * out[s]
        if out[s] > top:
            top = out[s]
    out[0] = math.exp(Delta - top) if Delta > -np.inf else 0.0
    total = out[0]
    for s in range(1, q + 1):
        out[s] = math.exp(out[s] - top)
        total += out[s]
    for s in range(q + 1):
        out[s] /= total


@numba.njit(cache=True)
def _heat_bath(spins, x, u, indptr, indices, K, Delta, q, buf):
    _site_weights(spins, x, indptr, indices, K, Delta, q, buf)
    acc = 0.0
    for s in range(q + 1):
        acc += buf[s]
        if u < acc:
            spins[x] = s
            return
    # u within rounding of 1: take the last state with positive weight
    for s in range(q, -1, -1):
        if buf[s] > 0:
            spins[x] = s
            return


@numba.njit(cache=True)
def _cluster_step(spins, n_free, eu, ev, p, q, s_bnd, ub, us, parent, rank, omega):
    n = spins.shape[0]
    for v in range(n):
        parent[v] = v
        rank[v] = 0
    for e in range(eu.shape[0]):
        a = spins[eu[e]]
        omega[e] = a != 0 and a == spins[ev[e]] and ub[e] < p
        if omega[e]:
            uf_union(parent, rank, eu[e], ev[e])
    # clusters touching a fixed site inherit the boundary spin
    root_spin = -np.ones(n, dtype=np.int64)
    for v in range(n_free, n):
        if spins[v] != 0:
            root_spin[uf_find(parent, v)] = s_bnd
    for v in range(n_free):
        if spins[v] == 0:
            continue
        r = uf_find(parent, v)
        if root_spin[r] < 0:
            root_spin[r] = 1 + min(int(us[r] * q), q - 1)
        spins[v] = root_spin[r]


@numba.njit(cache=True)
def _observe(spins, n_free, eu, ev, omega, parent, rank, target, inner_edge, origin, point, q, s_bnd, out):
    n = spins.shape[0]
    n_open = 0
    for v in range(n_free):
        if spins[v] != 0:
            n_open += 1
    n_inner = 0
    n_inner_open = 0
    for e in range(eu.shape[0]):
        if inner_edge[e]:
            n_inner += 1
            if omega[e]:
                n_inner_open += 1
    # open clusters of (V_psi, eta(omega)); the fixed sites form one wired class
    first_fixed = -1
    for v in range(n_free, n):
        if spins[v] != 0:
            if first_fixed < 0:
                first_fixed = v
            else:
                uf_union(parent, rank, first_fixed, v)
    size = np.zeros(n, dtype=np.int64)
    best = 0
    for v in range(n_free):
        if spins[v] != 0:
            r = uf_find(parent, v)
            size[r] += 1
            if size[r] > best:
                best = size[r]
    reach = 0
    if spins[origin] != 0:
        ro = uf_find(parent, origin)
        for v in range(n):
            if target[v] and spins[v] != 0 and uf_find(parent, v) == ro:
                reach = 1
                break
    conn = 1 if spins[origin] != 0 and spins[point] != 0 and uf_find(parent, origin) == uf_find(parent, point) else 0
    # closed clusters among free sites
    for v in range(n):
        parent[v] = v
        rank[v] = 0
    for e in range(eu.shape[0]):
        a, b = eu[e], ev[e]
        if a < n_free and b < n_free and spins[a] == 0 and spins[b] == 0:
            uf_union(parent, rank, a, b)
    for v in range(n):
        size[v] = 0
    best_closed = 0
    for v in range(n_free):
        if spins[v] == 0:
            r = uf_find(parent, v)
            size[r] += 1
            if size[r] > best_closed:
                best_closed = size[r]
    s0 = spins[origin]
    sx = spins[point]
    both = 1.0 if s0 != 0 and sx != 0 else 0.0
    same = 1.0 if s0 != 0 and s0 == sx else 0.0
    out[0] = n_open / n_free
    out[1] = n_inner_open / n_inner if n_inner > 0 else 0.0
    out[2] = best / n_free
    out[3] = reach
    out[4] = best_closed / n_free
    out[5] = same - both / q
    out[6] = (1.0 - 1.0 / q) * conn
    out[7] = 1.0 if s0 != 0 else 0.0
    out[8] = ((1.0 if s0 == s_bnd else 0.0) - (1.0 if s0 != 0 else 0.0) / q) if s_bnd > 0 else 0.0


@numba.njit(cache=True)
def _run_sweeps(spins, n_free, indptr, indices, eu, ev, K, Delta, p, q, s_bnd, random_order,
                U, record, target, inner_edge, origin, point, obs, spin_log, theta_log, row0):
    n = spins.shape[0]
    m = eu.shape[0]
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    omega = np.zeros(m, dtype=np.bool_)
    buf = np.zeros(q + 1)
    row = row0
    for t in range(U.shape[0]):
        u = U[t]
        off = n_free
        if random_order:
            order = np.argsort(u[n_free:2 * n_free])
            off = 2 * n_free
            for k in range(n_free):
                _heat_bath(spins, order[k], u[k], indptr, indices, K, Delta, q, buf)
        else:
            for x in range(n_free):
                _heat_bath(spins, x, u[x], indptr, indices, K, Delta, q, buf)
        _cluster_step(spins, n_free, eu, ev, p, q, s_bnd, u[off:off + m], u[off + m:off + m + n],
                      parent, rank, omega)
        if record[t]:
            if spin_log.shape[0] > 0:
                for v in range(n_free):
                    spin_log[row, v] = spins[v]
                for e in range(m):
                    theta_log[row, e] = omega[e]
            _observe(spins, n_free, eu, ev, omega, parent, rank, target, inner_edge, origin, point,
                     q, s_bnd, obs[row])
            row += 1
    return row


# ---------------------------------------------------------------------------
# single-step operations (Python level, used by tests and small examples)


def spin_to_bond(sigma, p: float, rng: np.random.Generator, edges) -> tuple[np.ndarray, np.ndarray]:
    """psi = [sigma != 0]; omega_e = 1 w.p. p on edges with equal nonzero end spins."""
    sigma = np.asarray(sigma)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    su, sv = sigma[edges[:, 0]], sigma[edges[:, 1]]
    omega = (su != 0) & (su == sv) & (rng.random(len(edges)) < p)
    return (sigma != 0).astype(np.int64), omega.astype(np.int64)


def bond_to_spin(psi, omega, q: int, rng: np.random.Generator, edges, boundary: int = 0,
                 fixed=None) -> np.ndarray:
    """Uniform spin in {1..q} per open cluster; clusters meeting ``fixed`` sites get ``boundary``."""
    from .clusters import UnionFind

    psi = np.asarray(psi)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n = len(psi)
    fixed = np.zeros(n, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
    uf = UnionFind(n)
    for (u, v), w in zip(edges, omega):
        if w:
            uf.union(int(u), int(v))
    draws = rng.random(n)
    spin_of: dict[int, int] = {}
    if boundary > 0:
        for v in np.flatnonzero(fixed & (psi != 0)):
            spin_of[uf.find(int(v))] = boundary
    sigma = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if not psi[v]:
            continue
        r = uf.find(v)
        if r not in spin_of:
            spin_of[r] = 1 + min(int(draws[r] * q), q - 1)
        sigma[v] = spin_of[r]
    return sigma


def site_conditional(sigma, x: int, graph: Graph, K: float, Delta: float, q: int) -> np.ndarray:
    """Exact conditional law of sigma_x given the other spins."""
    lat = lattice_from_graph(graph)
    indptr, indices = lat.csr()
    out = np.zeros(q + 1)
    _site_weights(np.asarray(sigma, dtype=np.int64), x, indptr, indices, float(K), float(Delta), int(q), out)
    return out


def heat_bath_site(sigma, x: int, graph: Graph, K: float, Delta: float, q: int,
                   rng: np.random.Generator) -> np.ndarray:
    sigma = np.array(sigma, dtype=np.int64)
    probs = site_conditional(sigma, x, graph, K, Delta, q)
    sigma[x] = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    sigma[x] = min(sigma[x], q)
    return sigma


# ---------------------------------------------------------------------------
# exact transition kernels on small graphs


def _all_spins(n: int, q: int) -> np.ndarray:
    import itertools

    return np.array(list(itertools.product(range(q + 1), repeat=n)), dtype=np.int64).reshape(-1, n)


def heat_bath_kernel(graph: Graph, x: int, K: float, Delta: float, q: int) -> np.ndarray:
    """Transition matrix of one heat-bath update at x (rows: from, columns: to)."""
    states = _all_spins(graph.n, q)
    index = {tuple(s): i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        probs = site_conditional(s, x, graph, K, Delta, q)
        for t in range(q + 1):
            s2 = s.copy()
            s2[x] = t
            P[i, index[tuple(s2)]] += probs[t]
    return P


def cluster_kernel(graph: Graph, K: float, q: int) -> np.ndarray:
    """Transition matrix of spin_to_bond followed by bond_to_spin (free boundary).

    P(sigma -> sigma') = sum over omega of prod_e p^w (1-p)^(1-w) on
    equal-nonzero edges, times q^-k if sigma' is constant on the k open
    clusters and agrees with sigma on the zero set, else 0.
    """
    import itertools

    from .clusters import label_clusters

    p = -math.expm1(-2.0 * K)
    states = _all_spins(graph.n, q)
    index = {tuple(s): i for i, s in enumerate(states)}
    edges = np.array(graph.edges, dtype=np.int64).reshape(-1, 2)
    eu, ev = edges[:, 0].copy(), edges[:, 1].copy()
    P = np.zeros((len(states), len(states)))
    group = -np.ones(graph.n, dtype=np.int64)
    for i, s in enumerate(states):
        agree = np.flatnonzero((s[eu] != 0) & (s[eu] == s[ev]))
        for bits in itertools.product((0, 1), repeat=len(agree)):
            w = np.zeros(len(edges), dtype=np.bool_)
            w[agree[np.array(bits, dtype=bool)]] = True
            prob = p ** int(sum(bits)) * (1 - p) ** (len(agree) - int(sum(bits)))
            if prob == 0.0:
                continue
            labels = label_clusters(graph.n, eu, ev, w, s != 0, group)
            roots = sorted(set(labels[labels >= 0].tolist()))
            for choice in itertools.product(range(1, q + 1), repeat=len(roots)):
                s2 = np.zeros(graph.n, dtype=np.int64)
                for r, c in zip(roots, choice):
                    s2[labels == r] = c
                P[i, index[tuple(s2)]] += prob / q ** len(roots)
    return P


def sweep_kernel(graph: Graph, K: float, Delta: float, q: int) -> np.ndarray:
    """Raster heat-bath pass followed by the cluster step."""
    P = np.eye((q + 1) ** graph.n)
    for x in range(graph.n):
        P = P @ heat_bath_kernel(graph, x, K, Delta, q)
    return P @ cluster_kernel(graph, K, q)


# ---------------------------------------------------------------------------
# chains


@dataclass
class ChainState:
    spins: np.ndarray
    sweeps: int
    rng: np.random.Generator

    def checkpoint(self, extra: dict | None = None) -> dict:
        return {"version": CHECKPOINT_VERSION, "sweeps": self.sweeps,
                "spins": self.spins.tolist(), "bit_generator": self.rng.bit_generator.state,
                **(extra or {})}

    def save(self, path: str | Path, extra: dict | None = None):
        Path(path).write_text(json.dumps(self.checkpoint(extra)))

    @classmethod
    def load(cls, path: str | Path) -> "ChainState":
        data = json.loads(Path(path).read_text())
        return cls.from_checkpoint(data)

    @classmethod
    def from_checkpoint(cls, data: dict) -> "ChainState":
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {data.get('version')!r}")
        state = data["bit_generator"]
        if state.get("bit_generator") != "PCG64":
            raise ValidationError("checkpoint generator must be PCG64")
        bg = np.random.PCG64()
        bg.state = state
        return cls(np.array(data["spins"], dtype=np.int64), int(data["sweeps"]), np.random.Generator(bg))


def chain_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """Generator for a chain: ``stream`` selects an independent child of ``seed``."""
    ss = np.random.SeedSequence(seed) if stream is None else np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def initial_state(lattice: Lattice, seed: int, stream: int | None = None, init: str = "ordered") -> ChainState:
    rng = chain_rng(seed, stream)
    spins = np.zeros(lattice.n, dtype=np.int64)
    spins[lattice.n_free:] = lattice.fixed_spin
    if init == "ordered":
        spins[:lattice.n_free] = max(lattice.fixed_spin, 1)
    elif init != "empty":
        raise ValidationError(f"unknown initial state {init!r}")
    return ChainState(spins, 0, rng)


@dataclass
class ObservableSeries:
    sweep: np.ndarray
    values: np.ndarray
    spins: np.ndarray | None = None
    omega: np.ndarray | None = None

    def __len__(self):
        return len(self.sweep)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, OBSERVABLES.index(name)]

    def to_csv(self, path: str | Path | None = None) -> str:
        lines = ["sweep," + ",".join(OBSERVABLES)]
        for t, row in zip(self.sweep, self.values):
            lines.append(f"{int(t)}," + ",".join(format(float(v), ".17g") for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


class Chain:
    """A single Markov chain on a lattice; owns its state and generator."""

    def __init__(self, lattice: Lattice, params: ModelParams, state: ChainState,
                 random_order: bool = False, chunk: int = 512):
        q = params.integer_q
        if lattice.fixed_spin > q:
            raise DomainError(f"boundary spin {lattice.fixed_spin} exceeds q={q}")
        if len(state.spins) != lattice.n:
            raise ValidationError("state does not match the lattice")
        self.lattice = lattice
        self.params = params
        self.q = q
        self.state = state
        self.random_order = bool(random_order)
        self.chunk = int(chunk)
        self._indptr, self._indices = lattice.csr()
        self._eu = np.ascontiguousarray(lattice.edges[:, 0])
        self._ev = np.ascontiguousarray(lattice.edges[:, 1])

    def advance(self, n_sweeps: int, thin: int = 1, record: bool = True,
                keep_configs: bool = False, phase: int | None = None) -> ObservableSeries:
        """Run ``n_sweeps`` sweeps, recording sweep t when (t - phase) % thin == 0.

        ``phase`` defaults to the current sweep count.
        """
        if n_sweeps < 0 or thin < 1:
            raise ValidationError("need n_sweeps >= 0 and thin >= 1")
        lat, prm = self.lattice, self.params
        B = lat.block_size(self.random_order)
        start = self.state.sweeps
        t_all = np.arange(start + 1, start + n_sweeps + 1)
        phase = start if phase is None else phase
        rec_all = ((t_all - phase) % thin == 0) & record
        n_rec = int(rec_all.sum())
        obs = np.zeros((n_rec, N_OBS))
        spin_log = np.zeros((n_rec if keep_configs else 0, lat.n_free), dtype=np.int64)
        theta_log = np.zeros((n_rec if keep_configs else 0, lat.n_edges), dtype=np.bool_)
        row = 0
        done = 0
        while done < n_sweeps:
            k = min(self.chunk, n_sweeps - done)
            U = self.state.rng.random((k, B))
            row = _run_sweeps(self.state.spins, lat.n_free, self._indptr, self._indices, self._eu, self._ev,
                              prm.K, prm.Delta, prm.p, self.q, lat.fixed_spin, self.random_order, U,
                              rec_all[done:done + k], lat.target, lat.inner_edge, lat.origin, lat.point,
                              obs, spin_log, theta_log, row)
            done += k
        self.state.sweeps += n_sweeps
        return ObservableSeries(t_all[rec_all], obs,
                                spin_log if keep_configs else None, theta_log if keep_configs else None)


def run_chain(lattice: Lattice, params: ModelParams, sweeps: int, burn_in: int, thin: int = 1,
              seed: int = 0, stream: int | None = None, random_order: bool = False,
              keep_configs: bool = False, init: str = "ordered",
              state: ChainState | None = None) -> tuple[ObservableSeries, ChainState]:
    """Burn in, then record every ``thin``-th of the remaining sweeps.

    ``sweeps`` counts the burn-in. With ``state`` (e.g. from a checkpoint)
    the chain continues from its sweep counter and only the part of the
    burn-in not yet done is run.
    """
    if burn_in >= sweeps:
        raise ValidationError(f"burn_in={burn_in} >= sweeps={sweeps} leaves an empty series")
    if thin < 1:
        raise ValidationError("thin must be at least 1")
    if state is None:
        state = initial_state(lattice, seed, stream, init)
    chain = Chain(lattice, params, state, random_order)
    remaining_burn = max(burn_in - state.sweeps, 0)
    chain.advance(remaining_burn, record=False)
    series = chain.advance(max(sweeps - state.sweeps, 0), thin=thin, keep_configs=keep_configs, phase=burn_in)
    return series, chain.state
