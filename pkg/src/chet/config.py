"""Run configuration dataclasses and JSON loading with strict keys."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

ABLATIONS = ("full", "no_dynamic", "no_transition")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    task: str = "diagnosis"
    ablation: str = "full"
    epochs: int = 50
    learning_rate: float = 0.01
    batch_size: int = 32
    seed: int = 0
    delta: float = 0.01
    s: int = 16
    s_prime: int = 12
    a: int = 8
    p: int = 32
    neighbor_mode: str = "union"
    pool_all: bool = False
    threshold: float = 0.5
    # validation criterion for best-epoch selection: "auto" (w-F1 / AUC by task), "loss", "recall"
    select_metric: str = "auto"
    k_values: tuple[int, ...] = (10, 20)
    # (train, val, test) patient counts; None means an 80/10/10 split
    split: tuple[int, int, int] | None = None
    split_seed: int = 0

    def __post_init__(self):
        self.k_values = tuple(self.k_values)
        if self.split is not None:
            self.split = tuple(self.split)
        self.validate()

    def validate(self) -> None:
        if self.task not in ("diagnosis", "heart_failure"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if min(self.s, self.s_prime, self.a, self.p, self.batch_size) < 1:
            raise ConfigError("all dimensions must be >= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError("delta must be in [0, 1]")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must be in (0, 1)")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.select_metric not in ("auto", "loss", "recall"):
            raise ConfigError(f"unknown select_metric {self.select_metric!r}")
        if self.neighbor_mode not in ("union", "out"):
            raise ConfigError(f"unknown neighbor_mode {self.neighbor_mode!r}")


PRESETS: dict[str, dict[str, Any]] = {
    "desk": {},
    "paper": {"s": 48, "s_prime": 32, "a": 32, "p": 256, "epochs": 200},
}


def train_config(preset: str = "desk", **overrides) -> TrainConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    return TrainConfig(**{**PRESETS[preset], **overrides})


def from_dict(cls, data: dict[str, Any]):
    """Instantiate a dataclass, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def to_dict(obj) -> dict[str, Any]:
    out = dataclasses.asdict(obj)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def config_hash(obj) -> str:
    blob = json.dumps(to_dict(obj), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def load_json(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    return data


@dataclass
class RunConfig:
    """File-level config: ``{"synth": {...}, "train": {...}, "preset": "desk"}``."""

    synth: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)
    preset: str = "desk"


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    rc = from_dict(RunConfig, load_json(path))
    if not isinstance(rc.synth, dict) or not isinstance(rc.train, dict):
        raise ConfigError("'synth' and 'train' must be objects")
    return rc
