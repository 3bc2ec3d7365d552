"""Pipeline configuration: nested dataclasses, JSON on disk, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .foreground import GrabcutConfig
from .motion import MotionPriorConfig
from .segmentation import GraphConfig
from .similarity import SimilarityConfig

SOLVER_CHOICES = ("expansion", "icm", "brute")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    motion: MotionPriorConfig = field(default_factory=MotionPriorConfig)
    grabcut: GrabcutConfig = field(default_factory=GrabcutConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    solver: str = "expansion"
    lookahead: int = 20
    tube_threshold: float = 1.0
    max_tubes: int = 32
    nms_threshold: float = 0.5
    merge_threshold: float = 0.5
    seed: int = 0
    single_thread: bool = False
    workers: int = 4

    def __post_init__(self):
        if self.solver not in SOLVER_CHOICES:
            raise ConfigError(f"solver must be one of {SOLVER_CHOICES}, got {self.solver!r}")
        if self.lookahead < 1:
            raise ConfigError("lookahead must be >= 1")
        if self.tube_threshold < 0:
            raise ConfigError("tube_threshold must be >= 0")
        if self.max_tubes < 0 or self.max_tubes > 255:
            raise ConfigError("max_tubes must lie in 0..255 (8-bit label maps)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data, "")


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: PipelineConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
