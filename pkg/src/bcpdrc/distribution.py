"""Explicit probability tables over small configuration spaces."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class FiniteDistribution:
    """Configurations (rows of ``configs``) with unnormalized log-weights.

    ``blocks`` names consecutive column groups, e.g. ``[("psi", 3), ("omega", 2)]``;
    rows are kept in lexicographic order of the columns.
    """

    configs: np.ndarray
    log_weights: np.ndarray
    blocks: list[tuple[str, int]]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.configs = np.asarray(self.configs, dtype=np.int64).reshape(len(self.log_weights), -1)
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if sum(w for _, w in self.blocks) != self.configs.shape[1]:
            raise ValueError("blocks do not cover the configuration columns")
        top = np.max(self.log_weights) if len(self.log_weights) else -np.inf
        if not np.isfinite(top):
            raise ValueError("distribution has no positive weight")
        rel = np.exp(self.log_weights - top)
        s = rel.sum()
        self._log_total = top + math.log(s)
        self._probs = rel / s

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def log_total(self) -> float:
        return self._log_total

    @property
    def total(self) -> float:
        return math.exp(self._log_total)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __len__(self):
        return len(self.log_weights)

    def columns(self, name: str) -> slice:
        start = 0
        for bname, width in self.blocks:
            if bname == name:
                return slice(start, start + width)
            start += width
        raise KeyError(name)

    def block(self, name: str) -> np.ndarray:
        return self.configs[:, self.columns(name)]

    def expect(self, values) -> float:
        return float(np.dot(self.probs, np.asarray(values, dtype=float)))

    def prob(self, mask) -> float:
        return float(self.probs[np.asarray(mask, dtype=bool)].sum())

    def marginal(self, names: Sequence[str]) -> "FiniteDistribution":
        """Sum out every block not listed in ``names``."""
        cols = np.concatenate([np.arange(self.columns(n).start, self.columns(n).stop) for n in names])
        sub = self.configs[:, cols]
        uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        # sum in log space relative to the largest weight to keep the scale
        top = np.max(self.log_weights)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inverse, np.exp(self.log_weights - top))
        with np.errstate(divide="ignore"):
            logw = np.log(acc) + top
        blocks = [(n, w) for n, w in self.blocks if n in names]
        blocks.sort(key=lambda b: list(names).index(b[0]))
        return FiniteDistribution(uniq, logw, blocks, dict(self.meta))

    def find(self, **parts) -> int:
        """Row index of the configuration whose blocks equal ``parts``."""
        mask = np.ones(len(self), dtype=bool)
        for name, value in parts.items():
            mask &= np.all(self.block(name) == np.asarray(value), axis=1)
        idx = np.flatnonzero(mask)
        if len(idx) != 1:
            raise KeyError(f"no unique configuration matching {parts}")
        return int(idx[0])

    def p(self, **parts) -> float:
        return float(self.probs[self.find(**parts)])

    # export ----------------------------------------------------------------

    def _rows(self):
        for cfg, lw, pr in zip(self.configs, self.log_weights, self.probs):
            out = {}
            for name, width in self.blocks:
                sl = cfg[self.columns(name)]
                out[name] = "".join(str(int(c)) for c in sl)
            out["weight"] = fmt17(math.exp(lw)) if lw > -np.inf else "0"
            out["probability"] = fmt17(pr)
            yield out

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        names = [n for n, _ in self.blocks] + ["weight", "probability"]
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for row in self._rows():
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path: str | Path | None = None) -> str:
        payload = {
            "blocks": [{"name": n, "width": w} for n, w in self.blocks],
            "log_total": self.log_total,
            "total": self.total,
            "meta": self.meta,
            "rows": list(self._rows()),
        }
        text = json.dumps(payload, indent=1, default=_json_default)
        if path is not None:
            Path(path).write_text(text)
        return text


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)
