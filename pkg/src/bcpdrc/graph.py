"""Finite graphs, lattice regions and boundary conditions.

A :class:`Region` is a finite vertex set ``V`` of Z^d together with every
lattice edge that has at least one endpoint in ``V``. Its closure ``V+``
adds the outer boundary ``dV``. Vertices of ``V`` are kept in row-major
(lexicographic) order and indexed ``0..|V|-1``; boundary vertices follow
at ``|V|..|V+|-1``, also lexicographically ordered.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DomainError, ValidationError

MAX_REGION_SITES = 4_000_000


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    Edge order is significant: it fixes the column order of edge
    configurations everywhere in the package.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        edges = tuple((int(min(u, v)), int(max(u, v))) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 0:
            raise ValidationError("negative vertex count")
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValidationError(f"loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge ({u}, {v}) has an endpoint outside 0..{self.n - 1}")
            if (u, v) in seen:
                raise ValidationError(f"multiple edge ({u}, {v})")
            seen.add((u, v))
        if self.labels is not None and len(self.labels) != self.n:
            raise ValidationError("labels must have one entry per vertex")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(a) for a in nbrs)

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @cached_property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency as (indptr, indices) arrays."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        indices = np.fromiter(itertools.chain.from_iterable(self.adjacency), dtype=np.int64,
                              count=int(indptr[-1]))
        return indptr, indices

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in self.adjacency[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == self.n

    def label(self, x: int):
        return x if self.labels is None else self.labels[x]

    # constructors -------------------------------------------------------

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple(itertools.combinations(range(n), 2)))

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise ValidationError("a simple cycle needs at least 3 vertices")
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def star(cls, n_leaves: int) -> "Graph":
        return cls(n_leaves + 1, tuple((0, i) for i in range(1, n_leaves + 1)))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, ())

    @classmethod
    def named(cls, name: str) -> "Graph":
        """``K<n>``, ``P<n>``, ``C<n>``, ``S<n>`` (star with n leaves) or ``E<n>`` (no edges)."""
        m = re.fullmatch(r"\s*([KPCSE])(\d+)\s*", name)
        if not m:
            raise ValidationError(f"unknown graph name {name!r}")
        kind, n = m.group(1), int(m.group(2))
        return {"K": cls.complete, "P": cls.path, "C": cls.cycle,
                "S": cls.star, "E": cls.empty}[kind](n)


def parse_edge_list(text: str) -> Graph:
    """Parse the plain-text adjacency format.

    One edge ``u v`` per line; a line with a single token declares an
    isolated vertex; ``#`` starts a comment. Vertex labels are arbitrary
    tokens, indexed in order of first appearance.
    """
    index: dict[str, int] = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) > 2:
            raise ValidationError(f"line {lineno}: expected 'u v', got {raw!r}")
        ids = [index.setdefault(t, len(index)) for t in tokens]
        if len(ids) == 2:
            edges.append((ids[0], ids[1]))
    labels = tuple(sorted(index, key=index.get))
    return Graph(len(index), tuple(edges), labels=labels)


def read_edge_list(path: str | Path) -> Graph:
    return parse_edge_list(Path(path).read_text())


def write_edge_list(graph: Graph) -> str:
    lines = [f"{graph.label(u)} {graph.label(v)}" for u, v in graph.edges]
    touched = {x for e in graph.edges for x in e}
    lines += [str(graph.label(x)) for x in range(graph.n) if x not in touched]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# lattice regions


def _neighbours(x: tuple[int, ...]):
    for k in range(len(x)):
        for step in (-1, 1):
            y = list(x)
            y[k] += step
            yield tuple(y)


@dataclass(frozen=True)
class Region:
    """Finite region of Z^d: interior ``V``, boundary ``dV`` and edge set ``E``."""

    dim: int
    vertices: tuple[tuple[int, ...], ...]
    boundary: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]
    box: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    @cached_property
    def closure(self) -> tuple[tuple[int, ...], ...]:
        return self.vertices + self.boundary

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {x: i for i, x in enumerate(self.closure)}

    @property
    def n_interior(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def n_closure(self) -> int:
        return len(self.vertices) + len(self.boundary)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def lattice_degree(self) -> int:
        return 2 * self.dim

    def graph_plus(self) -> Graph:
        """The graph (V+, E)."""
        return Graph(self.n_closure, self.edges, labels=self.closure)

    def graph_minus(self) -> Graph:
        """The graph on V keeping only edges with both endpoints in V."""
        nv = self.n_interior
        inner = tuple(e for e in self.edges if e[1] < nv)
        return Graph(nv, inner, labels=self.vertices)

    def interior_edge_mask(self) -> np.ndarray:
        nv = self.n_interior
        return np.array([e[1] < nv for e in self.edges], dtype=bool)

    @cached_property
    def external_components(self) -> tuple[int, ...]:
        """Component id of each boundary vertex in Z^d minus V.

        Two boundary vertices share an id when a lattice path avoiding V
        joins them; this is how a fully open exterior wires them together.
        """
        if not self.boundary:
            return ()
        if self.box is not None and self.dim >= 2:
            return (0,) * self.n_boundary
        pts = np.array(self.closure)
        lo = pts.min(axis=0) - 1
        hi = pts.max(axis=0) + 1
        inside = set(self.vertices)
        comp: dict[tuple[int, ...], int] = {}
        label = 0
        for start in self.boundary:
            if start in comp:
                continue
            comp[start] = label
            queue = deque([start])
            while queue:
                x = queue.popleft()
                for y in _neighbours(x):
                    if y in inside or y in comp:
                        continue
                    if any(c < l or c > h for c, l, h in zip(y, lo, hi)):
                        continue
                    comp[y] = label
                    queue.append(y)
            label += 1
        return tuple(comp[b] for b in self.boundary)

    def coordinates(self) -> np.ndarray:
        return np.array(self.vertices, dtype=np.int64).reshape(-1, self.dim)


def region_from_vertices(vertices: Iterable[Sequence[int]], dim: int | None = None,
                         max_sites: int = MAX_REGION_SITES,
                         box: tuple | None = None) -> Region:
    verts = sorted({tuple(int(c) for c in v) for v in vertices})
    if not verts:
        raise ValidationError("a region needs at least one vertex")
    d = len(verts[0]) if dim is None else dim
    if any(len(v) != d for v in verts):
        raise ValidationError("all vertices must have the same dimension")
    inside = set(verts)
    boundary = set()
    pairs = set()
    for x in verts:
        for y in _neighbours(x):
            if y not in inside:
                boundary.add(y)
            pairs.add((min(x, y), max(x, y)))
        if len(inside) + len(boundary) > max_sites:
            raise CapacityError(f"region closure exceeds {max_sites} sites")
    bnd = sorted(boundary)
    index = {x: i for i, x in enumerate(verts + bnd)}
    edges = []
    for x, y in sorted(pairs):
        i, j = index[x], index[y]
        edges.append((min(i, j), max(i, j)))
    return Region(d, tuple(verts), tuple(bnd), tuple(edges), box=box)


def build_box_bounds(lower: Sequence[int], upper: Sequence[int],
                     max_sites: int = MAX_REGION_SITES) -> Region:
    """Box region ``prod_i [lower_i, upper_i]``."""
    lower, upper = tuple(int(c) for c in lower), tuple(int(c) for c in upper)
    if len(lower) != len(upper) or not lower:
        raise ValidationError("box bounds must be non-empty and of equal length")
    if any(h < l for l, h in zip(lower, upper)):
        raise ValidationError("box upper bound below lower bound")
    sides = [h - l + 1 for l, h in zip(lower, upper)]
    n_sites = int(np.prod(sides)) + 2 * sum(int(np.prod(sides)) // s for s in sides)
    if n_sites > max_sites:
        raise CapacityError(f"box closure has {n_sites} sites, limit is {max_sites}")
    verts = itertools.product(*(range(l, h + 1) for l, h in zip(lower, upper)))
    return region_from_vertices(verts, dim=len(lower), max_sites=max_sites, box=(lower, upper))


def build_box(d: int, n: int, max_sites: int = MAX_REGION_SITES) -> Region:
    """The box region ``[-n, n]^d``."""
    if d < 1 or n < 0:
        raise DomainError("build_box needs d >= 1 and n >= 0")
    return build_box_bounds((-n,) * d, (n,) * d, max_sites=max_sites)


def torus_graph(d: int, n: int) -> Graph:
    """``[-n, n]^d`` with periodic identification (side ``2n+1``)."""
    side = 2 * n + 1
    if side < 3:
        raise DomainError("periodic boxes need side >= 3 (n >= 1)")
    coords = list(itertools.product(range(-n, n + 1), repeat=d))
    index = {x: i for i, x in enumerate(coords)}
    edges = []
    for x in coords:
        for k in range(d):
            y = list(x)
            y[k] = (y[k] + n + 1) % side - n
            edges.append((index[x], index[tuple(y)]))
    return Graph(len(coords), tuple(edges), labels=tuple(coords))


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundaryCondition:
    """External configuration ``(kappa, rho)`` seen by a region.

    ``ZERO`` closes every exterior vertex and edge, ``ONE`` opens them all
    (which wires boundary vertices joined outside V). ``free_kappa`` gives
    an arbitrary vertex part with every exterior edge closed. ``PERIODIC``
    is only meaningful for boxes and only used by the sampler.
    """

    kind: str
    kappa: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "one", "periodic", "custom"):
            raise ValidationError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "custom" and self.kappa is None:
            raise ValidationError("custom boundary needs a kappa vector")

    @classmethod
    def free_kappa(cls, kappa: Sequence[int]) -> "BoundaryCondition":
        return cls("custom", tuple(int(bool(k)) for k in kappa))

    @classmethod
    def parse(cls, name: str) -> "BoundaryCondition":
        key = name.strip().lower()
        presets = {"zero": ZERO, "0": ZERO, "free": ZERO, "one": ONE, "1": ONE,
                   "wired": ONE, "periodic": PERIODIC}
        if key not in presets:
            raise ValidationError(f"unknown boundary condition {name!r}")
        return presets[key]

    @property
    def wired(self) -> bool:
        return self.kind == "one"

    def kappa_for(self, region: Region) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(region.n_boundary, dtype=bool)
        if self.kind == "one":
            return np.ones(region.n_boundary, dtype=bool)
        if self.kind == "periodic":
            raise DomainError("PERIODIC has no vertex part; use torus_graph")
        if len(self.kappa) != region.n_boundary:
            raise ValidationError("kappa length does not match the region boundary")
        return np.array(self.kappa, dtype=bool)

    def wiring_for(self, region: Region) -> tuple[int, ...]:
        """Cluster-class id per boundary vertex (-1 when closed)."""
        kappa = self.kappa_for(region)
        if self.wired:
            return region.external_components
        ids, nxt = [], 0
        for k in kappa:
            ids.append(nxt if k else -1)
            nxt += bool(k)
        return tuple(ids)

    def le(self, other: "BoundaryCondition", region: Region) -> bool:
        """Pointwise order ``self <= other`` on the region's exterior."""
        if self.kind == "zero" or other.kind == "one":
            return True
        if self.kind == "one":
            return other.kind == "one"
        if other.kind == "zero":
            return not self.kappa_for(region).any()
        return bool(np.all(self.kappa_for(region) <= other.kappa_for(region)))

    def __str__(self):
        return self.kind if self.kind != "custom" else "kappa:" + "".join(map(str, self.kappa))


ZERO = BoundaryCondition("zero")
ONE = BoundaryCondition("one")
PERIODIC = BoundaryCondition("periodic")


def induced_open_subgraph(region: Region, psi: Sequence[int],
                          bc: BoundaryCondition = ZERO) -> Graph:
    """The graph Lambda(psi): open vertices of V+ and the edges of E joining them.

    ``psi`` gives the states of V, or of V+ (then its boundary part must
    agree with the boundary condition).
    """
    psi = np.asarray(psi, dtype=bool)
    kappa = bc.kappa_for(region)
    if psi.shape == (region.n_closure,):
        if not np.array_equal(psi[region.n_interior:], kappa):
            raise ValidationError("psi disagrees with kappa on the boundary")
        state = psi
    elif psi.shape == (region.n_interior,):
        state = np.concatenate([psi, kappa])
    else:
        raise ValidationError("psi must cover V or V+")
    keep = np.flatnonzero(state)
    relabel = {int(v): i for i, v in enumerate(keep)}
    edges = tuple((relabel[u], relabel[v]) for u, v in region.edges if state[u] and state[v])
    labels = tuple(region.closure[v] for v in keep)
    return Graph(len(keep), edges, labels=labels)
