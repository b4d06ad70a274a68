"""Run configuration: defaults < TOML file < BCPDRC_* environment < command-line flags."""

from __future__ import annotations

import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .params import ModelParams

ENV_PREFIX = "BCPDRC_"
COMMANDS = ("exact", "dominance", "sample", "scan", "constants")
FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    command: str = "constants"
    # model parameters: give (a, p) or (K, Delta), plus q
    a: float | None = None
    p: float | None = None
    K: float | None = None
    Delta: float | None = None
    q: float = 2.0
    # second parameter triple for pairwise comparisons
    a2: float | None = None
    p2: float | None = None
    q2: float | None = None
    # target: a named or file graph, or the box [-n, n]^d
    graph: str | None = None
    n: int | None = None
    d: int = 2
    boundary: str = "zero"
    s: int = 1
    # sampler
    sweeps: int = 10_000
    burn_in: int = 2_000
    thin: int = 1
    random_order: bool = False
    init: str = "ordered"
    checkpoint: str | None = None
    resume: str | None = None
    keep_configs: bool = False
    # scan
    a_values: list[float] = field(default_factory=list)
    p_values: list[float] = field(default_factory=list)
    gnuplot: list[str] = field(default_factory=list)
    # dominance
    check: str = "vertex-i"
    variant: str = "i"
    pairs: int = 1000
    measure_size: int = 4
    # run control and output
    seed: int = 0
    jobs: int = 1
    out_dir: str = "."
    format: str = "csv"

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise ValidationError(f"unknown format {self.format!r}; expected csv or json")
        if self.jobs < 1:
            raise ValidationError("jobs must be at least 1")
        if self.thin < 1:
            raise ValidationError("thin must be at least 1")
        return self

    def params(self) -> ModelParams:
        """The model parameters; exactly one of (a, p) and (K, Delta) must be set."""
        has_ap = self.a is not None or self.p is not None
        has_kd = self.K is not None or self.Delta is not None
        if has_ap == has_kd:
            raise ValidationError("give exactly one of (a, p) or (K, Delta)")
        if has_ap:
            if self.a is None or self.p is None:
                raise ValidationError("both a and p are required")
            return ModelParams.from_apq(self.a, self.p, self.q)
        if self.K is None or self.Delta is None:
            raise ValidationError("both K and Delta are required")
        return ModelParams.from_kdelta(self.K, self.Delta, self.q)

    def second_params(self) -> ModelParams:
        if self.a2 is None or self.p2 is None:
            raise ValidationError("pairwise checks need a2 and p2")
        return ModelParams.from_apq(self.a2, self.p2, self.q if self.q2 is None else self.q2)

    def to_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        return cls().updated(tomllib.loads(text), source="config file")

    def updated(self, values: dict, source: str = "overrides") -> "RunConfig":
        kinds = {f.name: f for f in fields(self)}
        new = dataclasses.replace(self)
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise ValidationError(f"unknown setting {key!r} in {source}")
            setattr(new, key, _coerce(key, raw, _field_kind(self, key)))
        return new


def _field_kind(cfg: RunConfig, key: str) -> str:
    # annotations are strings here (postponed evaluation)
    hint = str({f.name: f.type for f in fields(cfg)}[key])
    if hint.startswith("list"):
        return "list[str]" if "str" in hint else "list[float]"
    return hint.split("|")[0].strip()


def _coerce(key: str, raw, kind: str):
    if raw is None:
        return None
    try:
        if kind == "list[float]":
            items = raw.split(",") if isinstance(raw, str) else raw
            return [float(x) for x in items if str(x).strip() != ""]
        if kind == "list[str]":
            items = raw.split(",") if isinstance(raw, str) else raw
            return [str(x).strip() for x in items if str(x).strip()]
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if kind == "float":
            value = float(raw)
            if math.isnan(value):
                raise ValueError(raw)
            return value
        return str(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"setting {key!r}: cannot read {raw!r} as {kind}") from None


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    names = {f.name.upper(): f.name for f in fields(RunConfig)}
    out = {}
    for var, value in environ.items():
        if var.startswith(ENV_PREFIX) and var[len(ENV_PREFIX):] in names:
            out[names[var[len(ENV_PREFIX):]]] = value
    return out


def load_config(path: str | Path | None = None, flags: dict | None = None, environ=None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        try:
            cfg = RunConfig.from_toml(text)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"config {path}: {exc}") from None
    cfg = cfg.updated(env_overrides(environ), source="environment")
    cfg = cfg.updated({k: v for k, v in (flags or {}).items() if v is not None}, source="flags")
    return cfg.validate()
