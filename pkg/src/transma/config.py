"""Run configuration: presets, flat ``key=value`` files and command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .model import ModelConfig

SPLIT_BETA = {"scaffold": 6.0, "cliff": 3.0}


@dataclass
class RunConfig:
    seed: int = 0
    split_method: str = "scaffold"
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    clusters: int = 5
    # model
    d_model: int = 512
    heads: int = 8
    layers: int = 16
    ffn_dim: int = 2048
    mamba_layers: int = 2
    d_state: int = 16
    vocab_size: int = 100
    ratio: int = 16
    hidden: int = 128
    # fine-tuning
    lr0: float = 1e-5
    epochs: int = 200
    steps: int = 0  # > 0 overrides epochs
    batch_size: int = 4
    beta: float | None = None
    margin: float = 1.0
    # pretraining
    pretrain_lr0: float = 1e-4
    pretrain_steps: int = 1000
    pretrain_batch_size: int = 128
    mask_rate: float = 0.15
    noise: float = 1.0
    weight_type: float = 1.0
    weight_coord: float = 5.0
    weight_distance: float = 10.0
    # inputs
    conformers: str = ""  # XYZ-block file; empty means pseudo-conformers only
    radius: int = 2
    width: int = 2048

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return float(self.beta)
        if self.split_method not in SPLIT_BETA:
            raise ConfigError(f"unknown split_method {self.split_method!r}")
        return SPLIT_BETA[self.split_method]

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            d_model=self.d_model,
            heads=self.heads,
            layers_3d=self.layers,
            ffn_dim=self.ffn_dim,
            layers_seq=self.mamba_layers,
            d_state=self.d_state,
            vocab_size=self.vocab_size,
            ratio=self.ratio,
            hidden=self.hidden,
        )

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        d["beta_resolved"] = self.resolved_beta()
        return d

    def validate(self) -> RunConfig:
        if self.split_method not in SPLIT_BETA:
            raise ConfigError(f"split_method must be one of {sorted(SPLIT_BETA)}, got {self.split_method!r}")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must be three numbers summing to 1, got {self.split_ratios}")
        if self.d_model % self.heads:
            raise ConfigError(f"heads={self.heads} must divide d_model={self.d_model}")
        if self.width <= 0 or self.width & (self.width - 1):
            raise ConfigError(f"width must be a power of two, got {self.width}")
        for name in ("batch_size", "pretrain_batch_size", "layers", "mamba_layers", "clusters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 < self.mask_rate <= 1.0:
            raise ConfigError(f"mask_rate must be in (0, 1], got {self.mask_rate}")
        return self


PRESETS: dict[str, dict[str, Any]] = {
    "paper-scaffold": {"split_method": "scaffold", "beta": 6.0},
    "paper-cliff": {"split_method": "cliff", "beta": 3.0},
    # pretraining depth and batch as published; its checkpoints do not load into 16-layer models
    "paper-pretrain": {"layers": 15, "pretrain_batch_size": 128},
    "mini": {
        "d_model": 64,
        "heads": 4,
        "layers": 2,
        "ffn_dim": 128,
        "d_state": 8,
        "lr0": 3e-3,
        "steps": 2000,
        "pretrain_lr0": 1e-3,
        "pretrain_steps": 200,
        "pretrain_batch_size": 8,
    },
}

FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, value: str) -> Any:
    """Convert a textual value to the type of ``RunConfig.<key>``."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    text = value.strip()
    try:
        if key == "split_ratios":
            parts = tuple(float(v) for v in text.split(","))
            if len(parts) != 3:
                raise ValueError("need three values")
            return parts
        if key == "beta":
            return None if text.lower() in ("", "none", "auto") else float(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys map to underscores."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        try:
            out[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return out


def build_config(
    preset: str | None = None, file: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Defaults, then preset, then config file, then explicit overrides."""
    values: dict[str, Any] = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if file:
        values.update(read_config_file(file))
    for key, value in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    return RunConfig(**values).validate()
