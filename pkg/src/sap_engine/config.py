"""Run configuration: defaults, file/flag merging, validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .fitness import FitnessWeights
from .routing import DISPATCH_MODES, ONE_CALL
from .scheduler import Endpoint

DECISIONS = ("elite", "aggregate")


class ConfigError(ValueError):
    """Invalid or missing configuration value; message names the field."""


@dataclass(frozen=True)
class StageParams:
    temperature: float = 0.7
    max_tokens: int = 1024


@dataclass
class RunConfig:
    mu: int = 2
    lam: int = 2
    tau: int = 2
    generations: int = 2
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    dispatch_mode: str = ONE_CALL
    decision: str = "elite"
    route_cache: bool = True
    seed: int = 0
    max_objects: int = 32
    endpoints: list[Endpoint] = field(default_factory=list)
    serial: bool = False
    attempts: int = 3
    backoff_base: float = 0.5
    init_stage: StageParams = field(default_factory=lambda: StageParams(0.9, 512))
    evolve_stage: StageParams = field(default_factory=lambda: StageParams(0.9, 512))
    route_stage: StageParams = field(default_factory=StageParams)
    aggregate_stage: StageParams = field(default_factory=lambda: StageParams(0.3, 512))
    out_path: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.mu < 1:
            raise ConfigError("mu must be >= 1")
        if self.lam < 1:
            raise ConfigError("lambda must be >= 1")
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if self.max_objects < 1:
            raise ConfigError("max-objects must be >= 1")
        if self.dispatch_mode not in DISPATCH_MODES:
            raise ConfigError(f"dispatch-mode must be one of {DISPATCH_MODES}")
        if self.decision not in DECISIONS:
            raise ConfigError(f"decision must be one of {DECISIONS}")
        return self

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lambda": self.lam,
            "tau": self.tau,
            "generations": self.generations,
            "weights": {
                "c": str(self.weights.w_c),
                "d": str(self.weights.w_d),
                "e": str(self.weights.w_e),
                "u": str(self.weights.w_u),
            },
            "dispatch_mode": self.dispatch_mode,
            "decision": self.decision,
            "route_cache": self.route_cache,
            "seed": self.seed,
            "max_objects": self.max_objects,
            "serial": self.serial,
            "endpoints": [
                {"url": e.url, "model": e.model, "max_concurrency": e.max_concurrency}
                for e in self.endpoints
            ],
        }


def parse_weights(spec: str) -> FitnessWeights:
    """Parse a 'c,d,e,u' weight list; each entry may be a rational like 1/2."""
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4:
        raise ConfigError("weights must be four comma-separated values: c,d,e,u")
    try:
        values = [Fraction(p) for p in parts]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"weights: {exc}") from exc
    return FitnessWeights(*values)


_FILE_KEYS = {
    "mu": int,
    "lambda": int,
    "tau": int,
    "generations": int,
    "dispatch_mode": str,
    "decision": str,
    "route_cache": bool,
    "seed": int,
    "max_objects": int,
    "serial": bool,
    "attempts": int,
    "backoff_base": float,
}


def load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file root must be a JSON object")
    return doc


def build_config(file_values: Optional[dict] = None, **flags) -> RunConfig:
    """Merge precedence: explicit flags > config file > defaults."""
    cfg = RunConfig()
    merged: dict = {}

    if file_values:
        for key, kind in _FILE_KEYS.items():
            if key in file_values:
                value = file_values[key]
                if kind is bool:
                    ok = isinstance(value, bool)
                elif kind is int:
                    ok = isinstance(value, int) and not isinstance(value, bool)
                elif kind is float:
                    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
                else:
                    ok = isinstance(value, kind)
                if not ok:
                    raise ConfigError(f"config file field '{key}' must be {kind.__name__}")
                merged["lam" if key == "lambda" else key] = value
        if "weights" in file_values:
            w = file_values["weights"]
            if isinstance(w, dict):
                merged["weights"] = FitnessWeights(
                    Fraction(str(w.get("c", 1))),
                    Fraction(str(w.get("d", 1))),
                    Fraction(str(w.get("e", 1))),
                    Fraction(str(w.get("u", 1))),
                )
            elif isinstance(w, str):
                merged["weights"] = parse_weights(w)
            else:
                raise ConfigError("config file field 'weights' must be object or string")
        if "endpoints" in file_values:
            eps = file_values["endpoints"]
            if not isinstance(eps, list):
                raise ConfigError("config file field 'endpoints' must be a list")
            merged["endpoints"] = [
                Endpoint(
                    url=e["url"],
                    model=e.get("model", "default"),
                    max_concurrency=e.get("max_concurrency", 4),
                )
                for e in eps
            ]

    for key, value in flags.items():
        if value is not None:
            merged[key] = value

    cfg = replace(cfg, **merged)
    return cfg.validate()
