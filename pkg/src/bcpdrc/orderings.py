"""Stochastic orderings on {0,1}^I.

Measures are stored as probability vectors over {0,1}^n with coordinate
``i`` carried by bit ``n - 1 - i`` of the index, so index order equals the
lexicographic row order used by :class:`FiniteDistribution`.

Lattice conditions are checked on the reduced pairs (sigma^i, sigma) and
(sigma^i, sigma^j); ``exhaustive=True`` checks every pair instead.
Dominance is decided exactly by comparing the two measures on every
up-set, which is feasible up to n = 5 (7581 up-sets).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distribution import FiniteDistribution
from .errors import BCPError, CapacityError, DomainError, PositivityError, ValidationError
from .graph import ZERO, BoundaryCondition, Graph, Region
from .params import ModelParams

TOL = 1e-12
MAX_DOMINANCE_INDICES = 5
MAX_FULL_PAIR_INDICES = 10


@dataclass
class BinaryMeasure:
    probs: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        n = int(round(math.log2(len(self.probs)))) if len(self.probs) else -1
        if n < 0 or 1 << n != len(self.probs):
            raise ValidationError("a binary measure needs 2^n probabilities")
        if np.any(self.probs < 0):
            raise ValidationError("negative probability")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {self.probs.sum()!r}, not 1")
        self.n = n
        if not self.names:
            self.names = tuple(range(n))

    @classmethod
    def from_weights(cls, weights, names=()) -> "BinaryMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), names)

    @classmethod
    def product(cls, ps) -> "BinaryMeasure":
        ps = list(ps)
        probs = np.array([math.prod(p if b else 1 - p for p, b in zip(ps, bits))
                          for bits in itertools.product((0, 1), repeat=len(ps))])
        return cls(probs / probs.sum())

    @classmethod
    def from_distribution(cls, dist: FiniteDistribution, block: str | None = None) -> "BinaryMeasure":
        """Binary measure from a table over one 0/1 block (default: all columns)."""
        if block is not None and len(dist.blocks) > 1:
            dist = dist.marginal([block])
        n = dist.configs.shape[1]
        if n > 20:
            raise CapacityError("too many coordinates for a dense binary measure")
        if np.any((dist.configs != 0) & (dist.configs != 1)):
            raise ValidationError("configurations are not binary")
        idx = dist.configs @ (1 << np.arange(n - 1, -1, -1))
        probs = np.zeros(1 << n)
        np.add.at(probs, idx, dist.probs)
        return cls(probs)

    def restrict(self, coords) -> "BinaryMeasure":
        """Marginal on the listed coordinates (in that order)."""
        coords = list(coords)
        bits = self.configs()[:, coords]
        idx = bits @ (1 << np.arange(len(coords) - 1, -1, -1)) if coords else np.zeros(len(self.probs), int)
        probs = np.zeros(1 << len(coords))
        np.add.at(probs, idx, self.probs)
        return BinaryMeasure(probs, tuple(self.names[c] for c in coords))

    def configs(self) -> np.ndarray:
        return configs_of(self.n)

    def prob_of(self, mask) -> float:
        return float(self.probs[np.asarray(mask, dtype=bool)].sum())

    def check_positive(self):
        if np.any(self.probs <= 0):
            raise PositivityError("lattice conditions need a strictly positive measure")


@lru_cache(maxsize=None)
def configs_of(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.int64)


def _bit(n: int, i: int) -> int:
    return 1 << (n - 1 - i)


# ---------------------------------------------------------------------------
# lattice conditions


@dataclass
class CheckResult:
    ok: bool
    kind: str
    pairs_checked: int = 0
    witness: dict | None = None
    mode: str = ""

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "kind": self.kind, "mode": self.mode,
                "pairs_checked": self.pairs_checked, "witness": self.witness}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _reduced_pairs(n: int):
    """Index pairs (sigma^i, sigma) and (sigma^i, sigma^j) over all sigma, i, j."""
    for s in range(1 << n):
        for i in range(n):
            si = s | _bit(n, i)
            if si != s:
                yield si, s
            for j in range(n):
                if j != i:
                    yield si, s | _bit(n, j)


def _bits(n: int, s: int) -> str:
    return format(s, f"0{n}b") if n else ""


def _pair_witness(n, s1, s2, lhs, rhs, **extra):
    return {"sigma1": _bits(n, s1), "sigma2": _bits(n, s2), "join": _bits(n, s1 | s2),
            "meet": _bits(n, s1 & s2), "lhs": float(lhs), "rhs": float(rhs), **extra}


def _full_pairs(mu1: BinaryMeasure, mu2: BinaryMeasure):
    """First violating (s1, s2) over all pairs, or None; vectorized."""
    n = mu1.n
    if n > MAX_FULL_PAIR_INDICES:
        raise CapacityError(f"all-pairs check limited to |I| <= {MAX_FULL_PAIR_INDICES}")
    idx = np.arange(1 << n)
    s1, s2 = idx[:, None], idx[None, :]
    lhs = mu2.probs[s1 | s2] * mu1.probs[s1 & s2]
    rhs = np.outer(mu1.probs, mu2.probs)
    bad = np.argwhere(lhs < rhs - TOL)
    if len(bad) == 0:
        return None
    i, j = bad[0]
    return int(i), int(j), lhs[i, j], rhs[i, j]


def holley_check(mu1: BinaryMeasure, mu2: BinaryMeasure, exhaustive: bool = False) -> CheckResult:
    """mu2(s1 v s2) mu1(s1 ^ s2) >= mu1(s1) mu2(s2), up to 1e-12.

    The reduced pairs (sigma^i, sigma), (sigma^i, sigma^j) are checked
    first. They imply the full condition only when one of the measures
    satisfies the FKG condition; otherwise every pair is checked as well,
    so a True result always certifies the full condition. ``exhaustive``
    skips the reduction and checks all pairs directly.
    """
    if mu1.n != mu2.n:
        raise ValidationError("measures live on different index sets")
    mu1.check_positive()
    mu2.check_positive()
    n, p1, p2 = mu1.n, mu1.probs, mu2.probs
    total = (1 << n) ** 2
    if exhaustive:
        hit = _full_pairs(mu1, mu2)
        if hit is None:
            return CheckResult(True, "holley", total, mode="all-pairs")
        return CheckResult(False, "holley", total, _pair_witness(n, *hit), mode="all-pairs")
    count = 0
    for s1, s2 in _reduced_pairs(n):
        count += 1
        lhs = p2[s1 | s2] * p1[s1 & s2]
        rhs = p1[s1] * p2[s2]
        if lhs < rhs - TOL:
            return CheckResult(False, "holley", count, _pair_witness(n, s1, s2, lhs, rhs), mode="reduced")
    if fkg_check(mu1) or fkg_check(mu2):
        return CheckResult(True, "holley", count, mode="reduced")
    hit = _full_pairs(mu1, mu2)
    if hit is None:
        return CheckResult(True, "holley", count + total, mode="reduced+all-pairs")
    return CheckResult(False, "holley", count + total, _pair_witness(n, *hit), mode="reduced+all-pairs")


def reduced_holley_pairs_hold(mu1: BinaryMeasure, mu2: BinaryMeasure) -> bool:
    """The lattice inequality on the reduced pairs only (no FKG safeguard)."""
    p1, p2 = mu1.probs, mu2.probs
    return all(p2[s1 | s2] * p1[s1 & s2] >= p1[s1] * p2[s2] - TOL for s1, s2 in _reduced_pairs(mu1.n))


def fkg_check(mu: BinaryMeasure, exhaustive: bool = False) -> CheckResult:
    """mu(s1 v s2) mu(s1 ^ s2) >= mu(s1) mu(s2); reduced pairs suffice."""
    mu.check_positive()
    if exhaustive:
        hit = _full_pairs(mu, mu)
        total = (1 << mu.n) ** 2
        if hit is None:
            return CheckResult(True, "fkg", total, mode="all-pairs")
        return CheckResult(False, "fkg", total, _pair_witness(mu.n, *hit), mode="all-pairs")
    n, p = mu.n, mu.probs
    count = 0
    for s in range(1 << n):
        for i, j in itertools.combinations(range(n), 2):
            s1, s2 = s | _bit(n, i), s | _bit(n, j)
            count += 1
            lhs, rhs = p[s1 | s2] * p[s1 & s2], p[s1] * p[s2]
            if lhs < rhs - TOL:
                return CheckResult(False, "fkg", count, _pair_witness(n, s1, s2, lhs, rhs), mode="reduced")
    return CheckResult(True, "fkg", count, mode="reduced")


# ---------------------------------------------------------------------------
# up-sets and exact dominance


@lru_cache(maxsize=None)
def _upsets(n: int) -> tuple[frozenset, ...]:
    """Every up-set of {0,1}^n as a frozenset of indices."""
    if n == 0:
        return (frozenset(), frozenset({0}))
    smaller = _upsets(n - 1)
    out = []
    # split on the last coordinate: U0 (last bit 0) must be inside U1 (last bit 1)
    for u1 in smaller:
        for u0 in smaller:
            if u0 <= u1:
                out.append(frozenset({2 * t for t in u0} | {2 * t + 1 for t in u1}))
    return tuple(out)


@lru_cache(maxsize=None)
def upset_matrix(n: int) -> np.ndarray:
    """Boolean matrix: one row per up-set of {0,1}^n, one column per configuration."""
    if n > MAX_DOMINANCE_INDICES:
        raise CapacityError(f"up-set enumeration limited to |I| <= {MAX_DOMINANCE_INDICES}")
    sets = _upsets(n)
    mat = np.zeros((len(sets), 1 << n), dtype=bool)
    for k, u in enumerate(sets):
        mat[k, list(u)] = True
    mat.setflags(write=False)
    return mat


def count_upsets(n: int) -> int:
    return len(_upsets(n))


def dominance_exact(mu1: BinaryMeasure, mu2: BinaryMeasure, report: bool = False):
    """True iff mu1(U) <= mu2(U) + 1e-12 for every up-set U."""
    if mu1.n != mu2.n:
        raise ValidationError("measures live on different index sets")
    mat = upset_matrix(mu1.n)
    gap = mat @ mu1.probs - mat @ mu2.probs
    k = int(np.argmax(gap))
    ok = bool(gap[k] <= TOL)
    if not report:
        return ok
    witness = None
    if not ok:
        witness = {"upset": sorted(_bits(mu1.n, s) for s in np.flatnonzero(mat[k])),
                   "mu1_U": float(mat[k] @ mu1.probs), "mu2_U": float(mat[k] @ mu2.probs)}
    return CheckResult(ok, "dominance", len(mat), witness)


def positively_associated(mu: BinaryMeasure) -> bool:
    """mu(A n B) >= mu(A) mu(B) - 1e-12 over all pairs of up-sets."""
    mat = upset_matrix(mu.n).astype(float)
    pa = mat @ mu.probs
    joint = (mat * mu.probs) @ mat.T
    return bool(np.all(joint >= np.outer(pa, pa) - TOL))


# ---------------------------------------------------------------------------
# random measures for property tests


def random_measure(n: int, rng: np.random.Generator) -> BinaryMeasure:
    """Weights log-uniform on [e^-3, e^3], normalized."""
    return BinaryMeasure.from_weights(np.exp(rng.uniform(-3.0, 3.0, size=1 << n)))


def _monomials(n: int) -> np.ndarray:
    """Indicator matrix (configs x nonempty subsets A) of prod_{i in A} sigma_i."""
    cfg = configs_of(n)
    subsets = [A for k in range(1, n + 1) for A in itertools.combinations(range(n), k)]
    return np.array([[int(all(c[i] for i in A)) for A in subsets] for c in cfg], dtype=float), subsets


def random_fkg_measure(n: int, rng: np.random.Generator, scale: float = 1.0) -> BinaryMeasure:
    """Log-supermodular measure: arbitrary fields plus nonnegative multi-site couplings."""
    mono, subsets = _monomials(n)
    coef = np.array([rng.uniform(-1.5, 1.5) if len(A) == 1 else scale * rng.exponential(0.5) * (rng.random() < 0.6)
                     for A in subsets])
    return BinaryMeasure.from_weights(np.exp(mono @ coef))


def random_holley_pair(n: int, rng: np.random.Generator) -> tuple[BinaryMeasure, BinaryMeasure]:
    """(mu1, mu2) with mu1 log-supermodular and mu2 = mu1 * g / Z for increasing g."""
    mu1 = random_fkg_measure(n, rng)
    mono, subsets = _monomials(n)
    tilt = np.array([rng.exponential(0.4) * (rng.random() < 0.5) for _ in subsets])
    return mu1, BinaryMeasure.from_weights(mu1.probs * np.exp(mono @ tilt))


# ---------------------------------------------------------------------------
# sufficient conditions


def _check_range(params: ModelParams, q_lo: float, q_hi: float, a_open: bool = True):
    if a_open and not (0.0 < params.a < 1.0):
        raise DomainError(f"a={params.a} must lie in (0, 1)")
    if not (0.0 <= params.p < 1.0):
        raise DomainError(f"p={params.p} must lie in [0, 1)")
    if not (q_lo <= params.q <= q_hi):
        raise DomainError(f"q={params.q} must lie in [{q_lo}, {q_hi}]")


def _odds(a: float) -> float:
    return a / (1.0 - a)


def vertex_comparison_condition(which: str, params1: ModelParams, params2: ModelParams, delta: int) -> bool:
    """Sufficient conditions (i)-(iv) for Phi_1 <=st Phi_2 on vertex marginals."""
    for prm in (params1, params2):
        _check_range(prm, 1.0, 2.0)
    a1, p1, q1 = params1.a, params1.p, params1.q
    a2, p2, q2 = params2.a, params2.p, params2.q
    comp = q2 * _odds(a2) * (1 - p2) ** (delta / 2) >= q1 * _odds(a1) * (1 - p1) ** (delta / 2)
    if which == "i":
        return a1 <= a2 and p1 <= p2 and q1 == q2
    if which == "ii":
        return q2 * _odds(a2) >= q1 * _odds(a1) * (1 - p1) ** (-delta / 2)
    if which == "iii":
        return p1 <= p2 and q1 >= q2 and comp
    if which == "iv":
        if p1 == 0.0 and p2 == 0.0:
            ratio_ok = True
        else:
            ratio_ok = p2 / (q2 * (1 - p2)) >= p1 / (q1 * (1 - p1))
        return q1 <= q2 and comp and ratio_ok
    raise ValidationError(f"unknown variant {which!r}; expected i, ii, iii or iv")


def edge_weights_w(params: ModelParams, j: int) -> float:
    """w_j = (1 / (q r^j)) (1 - a) / a."""
    return (1.0 - params.a) / params.a / (params.q * params.r ** j)


def rc_comparison_condition(variant: str, params1: ModelParams, params2: ModelParams, delta: int) -> bool:
    """Edge-marginal comparison with a random-cluster measure (params1 has a = 1).

    (a): q2 <= q1 and ((1-p2)/p2)(1 + 2 w_d + w_d w_{d-1}) <= (1-p1)/p1 gives Y_1 <=st Y_2.
    (b): p1 >= p2 and q1 <= q2 gives Y_1 >=st Y_2.
    """
    if params1.a != 1.0:
        raise DomainError("the first measure must have a = 1")
    if not (0.0 < params2.a <= 1.0):
        raise DomainError("a2 must lie in (0, 1]")
    for prm in (params1, params2):
        if not (0.0 < prm.p < 1.0):
            raise DomainError(f"p={prm.p} must lie in (0, 1)")
        if prm.q < 1.0:
            raise DomainError(f"q={prm.q} must be at least 1")
    if variant == "a":
        wd, wd1 = edge_weights_w(params2, delta), edge_weights_w(params2, delta - 1)
        lhs = (1 - params2.p) / params2.p * (1 + 2 * wd + wd * wd1)
        return params2.q <= params1.q and lhs <= (1 - params1.p) / params1.p
    if variant == "b":
        return params1.p >= params2.p and params1.q <= params2.q
    raise ValidationError(f"unknown variant {variant!r}; expected a or b")


def edge_monotonicity_condition(params1: ModelParams, params2: ModelParams) -> bool:
    """a1 <= a2, p1 <= p2 and a common q in [1, 2] give Y_1 <=st Y_2."""
    for prm in (params1, params2):
        _check_range(prm, 1.0, 2.0)
    return (params1.a <= params2.a and params1.p <= params2.p and params1.q == params2.q
            and params1.p > 0.0)


# ---------------------------------------------------------------------------
# isolation probabilities and the one-site comparison


def open_neighbour_count(target, psi, x: int, bc: BoundaryCondition | None = None) -> int:
    """b(x, psi): edges from x to open vertices (boundary states taken from kappa)."""
    state = _full_state(target, psi, bc)
    edges = target.edges
    return sum(1 for u, v in edges if (u == x and state[v]) or (v == x and state[u]))


def _full_state(target, psi, bc):
    psi = np.asarray(psi, dtype=bool)
    if isinstance(target, Region):
        return np.concatenate([psi, (bc or ZERO).kappa_for(target)])
    return psi


def isolation_probability(target, psi, x: int, p: float, q: float,
                          bc: BoundaryCondition | None = None) -> float:
    """mu_{psi^x}(I_x): random-cluster probability that x has no open incident edge.

    Equals q Z(Lambda(psi)) / Z(Lambda(psi^x)) because an isolated x is one
    extra cluster of weight q.
    """
    from .exact import rc_partition_on

    psi = np.asarray(psi, dtype=int)
    if psi[x]:
        raise ValidationError("x must be closed in psi")
    psix = psi.copy()
    psix[x] = 1
    return q * rc_partition_on(target, psi, p, q, bc) / rc_partition_on(target, psix, p, q, bc)


def isolation_ratio_sides(params1: ModelParams, params2: ModelParams, target, psi, x: int,
                 bc1: BoundaryCondition | None = None,
                 bc2: BoundaryCondition | None = None) -> tuple[float, float, int]:
    """(left, right, b) of the one-site comparison inequality."""
    b = open_neighbour_count(target, psi, x, bc2)
    if open_neighbour_count(target, psi, x, bc1) != b:
        raise ValidationError("boundary conditions disagree on the neighbours of x")
    i2 = isolation_probability(target, psi, x, params2.p, params2.q, bc2)
    i1 = isolation_probability(target, psi, x, params1.p, params1.q, bc1)
    lhs = params2.q * _odds(params2.a) * (1 - params2.p) ** (b / 2) / i2
    rhs = params1.q * _odds(params1.a) * (1 - params1.p) ** (b / 2) / i1
    return lhs, rhs, b


def isolation_ratio_condition(params1: ModelParams, params2: ModelParams, target, psi, x: int,
                     bc1: BoundaryCondition | None = None, bc2: BoundaryCondition | None = None) -> bool:
    if params1.q < 1.0:
        raise DomainError("q1 must be at least 1")
    if not (1.0 <= params2.q <= 2.0):
        raise DomainError("q2 must lie in [1, 2]")
    lhs, rhs, _ = isolation_ratio_sides(params1, params2, target, psi, x, bc1, bc2)
    return lhs >= rhs * (1 - 1e-12)


# ---------------------------------------------------------------------------
# finite energy and the two-vertex counterexample


def finite_energy_bounds(params: ModelParams, delta: int) -> tuple[float, float]:
    """Bounds on the conditional probability that a vertex is open."""
    a, q = params.a, params.q
    lower = q * a / (1 - a + q * a)
    upper = a * q / (a * q + (1 - a) * params.r ** delta)
    return lower, upper


def single_site_conditionals(measure: BinaryMeasure) -> np.ndarray:
    """P(sigma_i = 1 | all other coordinates) for every i and configuration with sigma_i = 0.

    Returned shape (n, 2^(n-1)).
    """
    n, p = measure.n, measure.probs
    out = np.empty((n, 1 << max(n - 1, 0)))
    for i in range(n):
        b = _bit(n, i)
        lows = np.array([s for s in range(1 << n) if not s & b])
        up, down = p[lows | b], p[lows]
        with np.errstate(invalid="ignore"):
            out[i] = up / (up + down)
    return out


def nonmonotonicity_witness(a: float, p: float, q: float) -> tuple[float, float]:
    """P(psi_y = 1 | psi_x = s, omega_e = 0) on a single edge, for s = 0 and 1.

    Computed from the exact joint table; the first strictly exceeds the
    second, so the joint measure is not monotonic.
    """
    from .exact import drc_measure

    if not (0 < a < 1 and 0 < p < 1 and q > 0):
        raise DomainError("need a, p in (0, 1) and q > 0")
    d = drc_measure(Graph.complete(2), ModelParams.from_apq(a, p, q))
    psi, om = d.block("psi"), d.block("omega")[:, 0]
    values = []
    for s in (0, 1):
        cond = (psi[:, 0] == s) & (om == 0)
        values.append(d.prob(cond & (psi[:, 1] == 1)) / d.prob(cond))
    if not values[0] > values[1]:
        raise BCPError(f"expected a strict gap, got {values}")
    return values[0], values[1]


def nonmonotonicity_closed_form(a: float, p: float, q: float) -> tuple[float, float]:
    r = math.sqrt(1 - p)
    return q * a / (q * a + 1 - a), q * a * r / (q * a * r + 1 - a)
