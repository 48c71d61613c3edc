"""Pipeline configuration: one flat record of every tunable, JSON round-trip.

Defaults: 32 candidate neighbors per vertex, 50-point edge neighborhoods,
0.014 distance threshold, 1.5x mean-length prune factor, Adam at 1e-5 with
0.3 decay. Every field can be overridden by a JSON config file and again by
CLI flags.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class PipelineConfig:
    # data
    shape: str = "sphere"
    shape_params: dict | None = None
    points: int = 500
    seed: int = 0
    # candidate edges / embedding
    k_neighbors: int = 32
    patch_size: int = 50
    canonical: bool = True
    edge_samples: int = 10
    # assembly
    distance_threshold: float = 0.014
    length_factor: float = 1.5
    ring_max: int = 8
    circumball_filter: bool = True
    # training
    learning_rate: float = 1e-5
    lr_decay: float = 0.3
    milestones: list[int] | None = None
    batch_size: int = 256
    epochs: int = 200
    feature_widths: list[int] | None = None  # default (256, 256, 256)
    head_widths: list[int] | None = None  # default (128, 64)
    max_train_samples: int | None = None
    train_seed: int = 0
    # evaluation
    eval_samples: int = 10000
    tau: float = 0.001
    eval_seed: int = 0

    def resolved_feature_widths(self) -> tuple[int, ...]:
        return tuple(self.feature_widths) if self.feature_widths else (256, 256, 256)

    def resolved_head_widths(self) -> tuple[int, ...]:
        return tuple(self.head_widths) if self.head_widths else (128, 64)

    def as_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def override(self, **updates) -> "PipelineConfig":
        """New config with the given non-None fields replaced."""
        data = self.as_dict()
        for key, value in updates.items():
            if key not in data:
                raise ValueError(f"unknown config key {key!r}")
            if value is not None:
                data[key] = value
        return PipelineConfig.from_dict(data)
