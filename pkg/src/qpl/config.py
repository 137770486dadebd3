"""Run configuration: one JSON file plus command-line overrides (flags win)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .arithmetic import DiophantineParams, Frequency
from .errors import ConfigError, QPLError
from .potential import PotentialSpec

MIN_BOX_N = 50


@dataclass(frozen=True)
class DCConfig:
    gamma: float = 0.05
    tau: float = 2.0
    kmax: int = 10**4


@dataclass(frozen=True)
class RunConfig:
    lam: float = 10.0
    alpha: dict = field(default_factory=lambda: {"type": "golden"})
    potential: dict = field(default_factory=lambda: {"type": "amo"})
    dc: DCConfig = field(default_factory=DCConfig)
    epsilon: float = 0.1
    scales: int = 3
    n_max: int = 200
    seed: int = 0
    theta: float = 0.25
    t: float = 0.15
    N: int = 40
    box_N: int = 150
    q: int = 377
    induction_tau: float = 1.01
    output: str | None = None
    format: str = "json"

    def __post_init__(self):
        _validate(self)

    # the config dict uses "lambda" as its key; the attribute cannot
    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration field")
        dc = data.get("dc")
        if isinstance(dc, dict):
            bad = sorted(set(dc) - {"gamma", "tau", "kmax"})
            if bad:
                raise ConfigError(f"dc.{bad[0]}", "unknown field")
            data["dc"] = DCConfig(**dc)
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        dc_kw = {k: kw.pop(k) for k in ("gamma", "tau", "kmax") if k in kw}
        cfg = replace(self, **kw)
        if dc_kw:
            cfg = replace(cfg, dc=replace(cfg.dc, **dc_kw))
        return cfg

    # builders
    def frequency(self) -> Frequency:
        try:
            return Frequency.from_config(self.alpha)
        except (QPLError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("alpha", str(exc)) from None

    def potential_spec(self) -> PotentialSpec:
        try:
            return PotentialSpec.from_config(self.potential)
        except (QPLError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("potential", str(exc)) from None

    def diophantine(self) -> DiophantineParams:
        return DiophantineParams(self.dc.gamma, self.dc.tau, self.dc.kmax)


def _positive(name, value, integer=False):
    if integer:
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            raise ConfigError(name, f"must be a positive integer, got {value!r}")
    elif not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
        raise ConfigError(name, f"must be a positive number, got {value!r}")


def _validate(cfg: RunConfig) -> None:
    if not isinstance(cfg.lam, (int, float)) or isinstance(cfg.lam, bool) or not math.isfinite(cfg.lam) or cfg.lam < 0:
        raise ConfigError("lambda", f"must be a finite non-negative number, got {cfg.lam!r}")
    if not isinstance(cfg.dc, DCConfig):
        raise ConfigError("dc", "must be an object with gamma, tau, kmax")
    _positive("gamma", cfg.dc.gamma)
    if not isinstance(cfg.dc.tau, (int, float)) or not cfg.dc.tau > 1:
        raise ConfigError("tau", f"must exceed 1, got {cfg.dc.tau!r}")
    _positive("kmax", cfg.dc.kmax, integer=True)
    if not isinstance(cfg.epsilon, (int, float)) or not 0 < cfg.epsilon < 1:
        raise ConfigError("epsilon", f"must lie in (0, 1), got {cfg.epsilon!r}")
    if not isinstance(cfg.induction_tau, (int, float)) or not cfg.induction_tau > 1:
        raise ConfigError("induction_tau", f"must exceed 1, got {cfg.induction_tau!r}")
    for name in ("scales", "n_max", "box_N", "q"):
        _positive(name, getattr(cfg, name), integer=True)
    if cfg.box_N < MIN_BOX_N:
        raise ConfigError("box_N", f"must be at least {MIN_BOX_N}, got {cfg.box_N}")
    if not isinstance(cfg.N, int) or isinstance(cfg.N, bool) or not 0 <= cfg.N <= 100:
        raise ConfigError("N", f"must be an integer in 0..100, got {cfg.N!r}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError("seed", "must be an integer")
    for name in ("theta", "t"):
        v = getattr(cfg, name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ConfigError(name, f"must be a finite number, got {v!r}")
    if cfg.format not in ("json", "csv"):
        raise ConfigError("format", "must be 'json' or 'csv'")
    for name in ("alpha", "potential"):
        if not isinstance(getattr(cfg, name), dict) or "type" not in getattr(cfg, name):
            raise ConfigError(name, "must be an object with a 'type' field")
