"""Strict experiment configuration parsing (JSON, unknown keys rejected)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..distill.config import DistillConfig
from ..models.transformer import TransformerSpec
from ..ppo.trainer import PpoConfig
from ..sim import KINDS
from ..sim.params import RANGES


class ConfigError(Exception):
    """Raised for malformed or out-of-contract experiment configs."""


@dataclass
class ExperimentConfig:
    seed: int = 0
    num_envs: int = 256
    terrain_kinds: list[str] = field(default_factory=lambda: list(KINDS))
    range_set: str = "training"
    out_dir: str = "runs/default"
    ppo: PpoConfig = field(default_factory=PpoConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    transformer: TransformerSpec = field(default_factory=TransformerSpec)
    deterministic: bool = False

    def __post_init__(self):
        for kind in self.terrain_kinds:
            if kind not in KINDS:
                raise ConfigError(f"unknown terrain kind {kind!r}")
        if not self.terrain_kinds:
            raise ConfigError("terrain_kinds must not be empty")
        if self.range_set not in RANGES:
            raise ConfigError(f"unknown range set {self.range_set!r}")
        if self.num_envs < 1:
            raise ConfigError("num_envs must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d


def _build(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    nested = {"ppo": PpoConfig, "distill": DistillConfig, "transformer": TransformerSpec}
    kwargs = {}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
    for key, value in data.items():
        if key in nested:
            kwargs[key] = _build(nested[key], value, key)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"top level: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
