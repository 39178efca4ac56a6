"""Experiment configuration: a strict TOML schema.

Unknown keys are rejected at every level and numbers are not coerced from
strings.  ``dump_toml`` writes every default explicitly, so a config read
back from its own dump is identical to the original.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, List, Literal, Optional

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import families as fam

__all__ = [
    "ACTIONS",
    "ConfigError",
    "ExperimentConfig",
    "Tolerances",
    "VerifySettings",
    "Axis",
    "PhaseGrid",
    "load_config",
    "parse_config",
    "dump_toml",
    "config_hash",
]

ACTIONS = ("sequences", "moments", "classify", "simulate", "verify", "phase-diagram")
Action = Literal["sequences", "moments", "classify", "simulate", "verify", "phase-diagram"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class Tolerances(_Strict):
    lln: float = Field(0.05, gt=0)
    l2: float = Field(0.01, gt=0)
    l2_moment: float = Field(0.02, gt=0)
    ks_delta: float = Field(0.01, gt=0, lt=1)
    rate: float = Field(0.05, gt=0)
    quad_variation: float = Field(0.05, gt=0)
    lil_lower: float = Field(0.4, ge=0, lt=1)
    lil_upper: float = Field(0.15, ge=0)
    lil_fraction: float = Field(0.8, gt=0, le=1)


class VerifySettings(_Strict):
    min_m: int = Field(1000, ge=1)
    # random-drift test: checkpoint n and long horizon (defaults: largest checkpoint <= N/100, and N)
    drift_n: Optional[int] = Field(None, ge=1)
    n_big: Optional[int] = Field(None, ge=2)
    quad_trajectories: int = Field(0, ge=0)
    lil_trajectories: int = Field(0, ge=0)
    lil_horizon: Optional[int] = Field(None, ge=100)


class Axis(_Strict):
    """Inclusive grid start, start + step, ... <= stop."""

    start: float
    stop: float
    step: float

    def values(self) -> list:
        if not self.step > 0 or self.stop < self.start:
            return []
        k = int((self.stop - self.start) / self.step + 1e-9)
        return [round(self.start + i * self.step, 12) for i in range(k + 1)]


class PhaseGrid(_Strict):
    theta: float = Field(gt=0)
    alpha: float = Field(ge=0, lt=1)
    kappa: Axis
    eta: Axis


class ExperimentConfig(_Strict):
    alpha: dict
    eps: dict
    q: float = Field(0.5, ge=0, le=1)
    N: int = Field(1000, ge=1)
    checkpoints: Optional[List[int]] = None
    m: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)
    actions: List[Action] = Field(default_factory=lambda: ["classify"])
    out: str = "out"
    ensemble_format: Literal["csv", "bin", "both"] = "both"
    tolerances: Tolerances = Field(default_factory=Tolerances)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    phase: Optional[PhaseGrid] = None

    @field_validator("alpha")
    @classmethod
    def _alpha_family(cls, v):
        fam.family_from_dict(v, "alpha")
        return v

    @field_validator("eps")
    @classmethod
    def _eps_family(cls, v):
        fam.family_from_dict(v, "eps")
        return v

    @field_validator("checkpoints")
    @classmethod
    def _checkpoints(cls, cps, info):
        if cps is None:
            return cps
        N = info.data.get("N")
        if not cps:
            raise ValueError("must be non-empty")
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1 or (N is not None and cps[-1] > N):
            raise ValueError("must be strictly increasing within [1, N]")
        return cps

    @model_validator(mode="after")
    def _consistent(self):
        if "phase-diagram" in self.actions and self.phase is None:
            raise ValueError("phase: required by the phase-diagram action")
        return self

    # convenience
    def alpha_family(self):
        return fam.family_from_dict(self.alpha, "alpha")

    def eps_family(self):
        return fam.family_from_dict(self.eps, "eps")

    def checkpoint_list(self) -> list:
        return list(self.checkpoints) if self.checkpoints is not None else [self.N]


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "config"
        lines.append(f"field '{loc}': {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict, **overrides) -> ExperimentConfig:
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as err:
        where = f"line {err.lineno}, column {err.colno}" if hasattr(err, "lineno") else "syntax"
        raise ConfigError(f"{path}: {where}: {getattr(err, 'msg', err)}") from None
    return parse_config(data, **overrides)


def _plain(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json", exclude_none=True)


def dump_toml(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(_plain(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form (sorted keys, defaults included)."""
    blob = json.dumps(_plain(cfg), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return _plain(cfg)
