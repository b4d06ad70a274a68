"""Finite-box estimates over the (a, p) plane and the two-dimensional constants."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import exact
from .errors import DomainError, ValidationError
from .graph import BoundaryCondition, Graph
from .orderings import vertex_comparison_condition, rc_comparison_condition
from .params import ModelParams
from .sampler import OBSERVABLES, Chain, ObservableSeries, initial_state, make_lattice, run_chain

N_BATCHES = 32
DEFAULT_RADIUS = 16
P_C_SITE = 0.592746
P_C_SITE_DISPLAY = 0.593

# observables reported by scans (per-sample columns of the sampler)
SCAN_OBSERVABLES = OBSERVABLES


# ---------------------------------------------------------------------------
# constants and arcs


def critical_constants(d: int = 2) -> dict[str, float]:
    """Constants of the square-lattice phase diagram."""
    if d != 2:
        raise DomainError("constants are only available for d = 2")
    s2 = math.sqrt(2.0)
    pi_c = s2 / (1.0 + s2)
    g4 = (1.0 + s2) ** 4
    return {
        "pi_c": pi_c,
        "p_c_site": P_C_SITE,
        "a_bar": 1.0 / (1.0 + g4),
        "p_bar": 1.0 - 1.0 / g4,
        "K_c": -2.0 * math.log1p(-pi_c),
        "J_c": -0.5 * math.log1p(-pi_c),
        "a_closed_site": (1.0 - P_C_SITE) / (1.0 + P_C_SITE),
        "a_open_site": P_C_SITE / (2.0 - P_C_SITE),
    }


def constants_from_pi(pi_c: float, d: int) -> dict[str, float]:
    """(a_bar, p_bar) from the random-cluster critical point, any dimension."""
    t = (1.0 - pi_c) ** (2 * d)
    return {"a_bar": t / (1.0 + t), "p_bar": 1.0 - (1.0 - pi_c) ** 4}


def arc(p, exponent: float):
    """a solving a / (1 - a) = (1 - p)^exponent."""
    odds = np.power(1.0 - np.asarray(p, dtype=float), exponent)
    out = odds / (1.0 + odds)
    return float(out) if np.ndim(out) == 0 else out


def h_zero_arc(p, d: int = 2):
    """Zero-field arc of the q = 1 model on a periodic box: a/(1-a) = (1-p)^(d/2)."""
    return arc(p, d / 2.0)


def field_ratio_arc(p, ratio: float, d: int = 2):
    """Arc of constant h / J for the q = 1 model: a/(1-a) = (1-p)^(d/2 - ratio/4)."""
    return arc(p, d / 2.0 - ratio / 4.0)


def region_predicates(a: float, p: float) -> dict[str, bool]:
    """Parameter regions where comparison arguments decide the q = 2 phase.

    ``closed_strip`` and ``open_strip`` are the two explicit strips; the
    remaining flags compare with the critical random-cluster measure and
    with the critical site-percolation product measures at p = 0.
    """
    if not (0.0 < a < 1.0 and 0.0 < p < 1.0):
        raise DomainError("region predicates need (a, p) in (0, 1)^2")
    c = critical_constants(2)
    odds = a / (1.0 - a)
    closed_strip = 2.0 * odds < 1.0 - p and p > c["p_bar"]
    open_strip = 2.0 * odds > 8.0 * (1.0 - p) / (2.0 - p) ** 3 and p > 2.0 * c["p_bar"] / (1.0 + c["p_bar"])
    a_star = c["a_closed_site"]
    below_rc = p < c["pi_c"]
    rc_dominated = rc_comparison_condition("a", ModelParams.from_apq(1.0, c["pi_c"], 2.0),
                                   ModelParams.from_apq(a, p, 2.0), 4)
    closed_arc = odds < a_star / (1.0 - a_star) * (1.0 - p) ** 2
    return {
        "closed_strip": bool(closed_strip),
        "open_strip": bool(open_strip),
        "predict_closed_cluster": bool(closed_strip or closed_arc),
        "predict_open_cluster": bool(open_strip or a > c["a_open_site"]),
        "predict_long_range_order": bool(open_strip or (rc_dominated and not below_rc)),
        "no_long_range_order": bool(below_rc),
        "left_of_closed_arc": bool(closed_arc),
        "right_of_open_line": bool(a > c["a_open_site"]),
        "above_rc_comparison": bool(rc_dominated),
    }


def closed_arc_condition(a: float, p: float, a_star: float, delta: int = 4) -> bool:
    """Vertex comparison of (a, p, 2) with the product measure (a_star, 0, 2)."""
    return vertex_comparison_condition("ii", ModelParams.from_apq(a, p, 2.0), ModelParams.from_apq(a_star, 0.0, 2.0), delta)


# ---------------------------------------------------------------------------
# estimators


def batch_means(x, batches: int = N_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error; the error is NaN with fewer than 2 samples."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    if len(x) < 2:
        return float(x.mean()), math.nan
    b = min(batches, len(x))
    size = len(x) // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(b))


def tau_estimate(series: ObservableSeries, q: int) -> dict[str, float]:
    """tau_q(0, x) from spin statistics and from (1 - 1/q) P(0 <-> x), with errors."""
    if q == 1:
        return {"spin": 0.0, "spin_err": 0.0, "conn": 0.0, "conn_err": 0.0}
    spin, spin_err = batch_means(series.column("tau_spin"))
    conn, conn_err = batch_means(series.column("tau_conn"))
    return {"spin": spin, "spin_err": spin_err, "conn": conn, "conn_err": conn_err}


def tau_exact(graph: Graph, K: float, Delta: float, q: int, x: int, y: int) -> dict[str, float]:
    """Both sides of the two-point identity from exact tables."""
    params = ModelParams.from_kdelta(K, Delta, q)
    conn = exact.connectivity(exact.drc_measure(graph, params), x, y)
    return {"spin": exact.two_point(graph, K, Delta, q, x, y), "conn": (1.0 - 1.0 / q) * conn}


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScanGrid:
    points: tuple[tuple[float, float], ...]
    q: float = 2.0
    n: int = DEFAULT_RADIUS
    d: int = 2
    boundary: str = "one"
    s: int = 1
    sweeps: int = 10_000
    burn_in: int = 2_000
    thin: int = 1
    seed: int = 0
    random_order: bool = False
    batches: int = N_BATCHES

    def __post_init__(self):
        pts = tuple(sorted((float(a), float(p)) for a, p in self.points))
        if not pts:
            raise ValidationError("scan grid is empty")
        for a, p in pts:
            if not (0.0 < a < 1.0 and 0.0 <= p < 1.0):
                raise DomainError(f"grid point (a={a}, p={p}) outside (0, 1) x [0, 1)")
        object.__setattr__(self, "points", pts)
        BoundaryCondition.parse(self.boundary)
        if self.burn_in >= self.sweeps:
            raise ValidationError(f"burn_in={self.burn_in} >= sweeps={self.sweeps} leaves an empty series")
        if self.q != int(self.q) or self.q < 1:
            raise DomainError("scans need integer q >= 1")

    @classmethod
    def product(cls, a_values, p_values, **kw) -> "ScanGrid":
        return cls(tuple((a, p) for a in a_values for p in p_values), **kw)

    def lattice(self):
        return make_lattice(self.d, self.n, self.boundary, self.s)


def _scan_point(args) -> dict:
    grid, index = args
    a, p = grid.points[index]
    params = ModelParams.from_apq(a, p, grid.q)
    series, _ = run_chain(grid.lattice(), params, grid.sweeps, grid.burn_in, grid.thin,
                          seed=grid.seed, stream=index, random_order=grid.random_order)
    row = {"a": a, "p": p, "q": grid.q, "n": grid.n, "boundary": grid.boundary,
           "samples": len(series)}
    for name in SCAN_OBSERVABLES:
        mean, err = batch_means(series.column(name), grid.batches)
        row[name] = mean
        row[name + "_err"] = err
    row["error_defined"] = len(series) >= 2
    return row


@dataclass
class ScanResult:
    grid: ScanGrid
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self, path: str | Path | None = None) -> str:
        keys = list(self.rows[0])
        lines = [",".join(keys)]
        for r in self.rows:
            lines.append(",".join(_fmt(r[k]) for k in keys))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps({"grid": asdict(self.grid), "rows": self.rows}, indent=1, allow_nan=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_gnuplot(self, observable: str, path: str | Path | None = None) -> str:
        """``matrix nonuniform`` layout: first row holds the a values, first column the p values."""
        a_vals = sorted({r["a"] for r in self.rows})
        p_vals = sorted({r["p"] for r in self.rows})
        value = {(r["a"], r["p"]): r[observable] for r in self.rows}
        lines = [" ".join([str(len(a_vals))] + [_fmt(a) for a in a_vals])]
        for p in p_vals:
            lines.append(" ".join([_fmt(p)] + [_fmt(value.get((a, p), math.nan)) for a in a_vals]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def scan(grid: ScanGrid, jobs: int = 1) -> ScanResult:
    """One chain per grid point, seeded by (grid.seed, point index); rows in grid order."""
    tasks = [(grid, i) for i in range(len(grid.points))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_point, tasks))
    else:
        rows = [_scan_point(t) for t in tasks]
    return ScanResult(grid, rows)


def hysteresis_scan(p: float, a_values, q: float = 2.0, n: int = 8, boundary: str = "one", s: int = 1,
                    sweeps: int = 2_000, burn_in: int = 500, seed: int = 0) -> list[dict]:
    """Ascending then descending a at fixed p, carrying the chain state between points."""
    lattice = make_lattice(2, n, boundary, s)
    state = initial_state(lattice, seed, init="empty")
    a_values = sorted(a_values)
    rows = []
    for direction, values in (("up", a_values), ("down", a_values[::-1])):
        for a in values:
            chain = Chain(lattice, ModelParams.from_apq(a, p, q), state)
            chain.advance(burn_in, record=False)
            series = chain.advance(sweeps - burn_in)
            mean, err = batch_means(series.column("open_vertex_density"))
            rows.append({"direction": direction, "a": a, "p": p, "open_vertex_density": mean,
                         "open_vertex_density_err": err})
    return rows
