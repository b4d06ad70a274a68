"""Model parameters in the (a, p, q) and (K, Delta, q) parametrizations.

The two are linked by ``p = 1 - exp(-2K)`` and ``a / (1 - a) = exp(-Delta)``.
Log-weights are computed from whichever pair was supplied so that the
exact engine does not lose precision on a round trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    a: float
    p: float
    q: float
    K: float
    Delta: float

    def __post_init__(self):
        if not (0.0 < self.a <= 1.0):
            raise DomainError(f"vertex parameter a={self.a} outside (0, 1]")
        if not (0.0 <= self.p < 1.0):
            raise DomainError(f"edge parameter p={self.p} outside [0, 1)")
        if not (self.q > 0.0) or math.isinf(self.q):
            raise DomainError(f"cluster weight q={self.q} must be positive and finite")
        if self.K < 0:
            raise DomainError(f"K={self.K} must be non-negative")

    @classmethod
    def from_apq(cls, a: float, p: float, q: float) -> "ModelParams":
        a, p, q = float(a), float(p), float(q)
        if not (0.0 < a <= 1.0):
            raise DomainError(f"vertex parameter a={a} outside (0, 1]")
        if not (0.0 <= p < 1.0):
            raise DomainError(f"edge parameter p={p} outside [0, 1)")
        K = -0.5 * math.log1p(-p)
        Delta = -math.inf if a == 1.0 else math.log1p(-a) - math.log(a)
        return cls(a, p, q, K, Delta)

    @classmethod
    def from_kdelta(cls, K: float, Delta: float, q: float) -> "ModelParams":
        K, Delta, q = float(K), float(Delta), float(q)
        if K < 0 or math.isnan(K):
            raise DomainError(f"K={K} must be non-negative")
        if math.isnan(Delta) or Delta == math.inf:
            raise DomainError(f"Delta={Delta} not allowed")
        p = -math.expm1(-2.0 * K)
        a = 1.0 if Delta == -math.inf else 1.0 / (1.0 + math.exp(Delta))
        return cls(a, p, q, K, Delta)

    # log-factors of the DRC weight ---------------------------------------

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.p)

    @property
    def log_r(self) -> float:
        return -self.K

    @property
    def log_vertex_ratio(self) -> float:
        """log(a / (1 - a)); +inf when a = 1."""
        return -self.Delta

    @property
    def log_edge_ratio(self) -> float:
        """log(p / (1 - p)); -inf when p = 0."""
        if self.K == 0.0:
            return -math.inf
        return math.log(math.expm1(2.0 * self.K))

    @property
    def edge_ratio(self) -> float:
        return math.expm1(2.0 * self.K)

    @property
    def vertex_ratio(self) -> float:
        return math.inf if self.a == 1.0 else math.exp(-self.Delta)

    @property
    def log_q(self) -> float:
        return math.log(self.q)

    @property
    def integer_q(self) -> int:
        if self.q != int(self.q) or self.q < 1:
            raise DomainError(f"spin constructions need integer q >= 1, got q={self.q}")
        return int(self.q)

    def with_q(self, q: float) -> "ModelParams":
        return ModelParams(self.a, self.p, float(q), self.K, self.Delta)

    def as_dict(self) -> dict:
        return {"a": self.a, "p": self.p, "q": self.q, "K": self.K, "Delta": self.Delta}


def apq(a: float, p: float, q: float) -> ModelParams:
    return ModelParams.from_apq(a, p, q)


def kdq(K: float, Delta: float, q: float) -> ModelParams:
    return ModelParams.from_kdelta(K, Delta, q)
