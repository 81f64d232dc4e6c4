"""Experiment configuration (JSON).

Recognised keys::

    preset         "covid" | "mura" | "cholesterol"      (or "model": inline spec)
    scale          "desk" | "paper"                      default "desk"
    dataset        "synthetic" or {"kind": "synthetic", "n": 192, "noise": 1.0,
                   "positive_fraction": 0.5}
                   {"kind": "csv", "path": ..., "features": [...], "label": "ldl_c"}
                   {"kind": "tensor_dir", "path": ...}
    clients        number of sites                       default 1
    ratio          "7:2:1"                               default equal parts
    epochs, batch_size, learning_rate, seed              default from the preset
    mode           "split" | "oracle"                    default "split"
    out            output directory                      optional
    repeats        runs per sweep cell                   default 1
    timeout        seconds to wait on a peer (TCP)       default 60
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from ..data.partition import SplitRatio, parse_ratio
from ..errors import ConfigError, ParseError, SplitMeshError
from ..model import SCALES, ModelSpec, TrainConfig, preset

KNOWN_KEYS = {"preset", "scale", "model", "dataset", "clients", "ratio", "epochs", "batch_size",
              "learning_rate", "seed", "mode", "out", "repeats", "timeout"}
DATASET_KINDS = ("synthetic", "csv", "tensor_dir")
MODES = ("split", "oracle")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: Optional[str] = "covid"
    scale: str = "desk"
    model: Optional[dict] = None
    dataset: dict = field(default_factory=lambda: {"kind": "synthetic"})
    clients: int = 1
    ratio: Optional[str] = None
    epochs: Optional[int] = None
    batch_size: Optional[int] = None
    learning_rate: Optional[float] = None
    seed: int = 0
    mode: str = "split"
    out: Optional[str] = None
    repeats: int = 1
    timeout: float = 60.0

    def with_(self, **changes) -> "ExperimentConfig":
        return validate_config(replace(self, **changes))

    @property
    def split_ratio(self) -> SplitRatio:
        if self.mode == "oracle":
            return SplitRatio((1,))
        if self.ratio is None:
            return SplitRatio((1,) * self.clients)
        return parse_ratio(self.ratio)

    @property
    def ratio_text(self) -> str:
        return str(self.split_ratio)

    @property
    def client_count(self) -> int:
        return 1 if self.mode == "oracle" else self.clients

    def model_and_training(self) -> tuple[ModelSpec, TrainConfig]:
        if self.model is not None:
            spec = ModelSpec.from_dict(self.model)
            base = TrainConfig(loss=spec.loss)
        else:
            spec, base = preset(self.preset, self.scale)
        cfg = TrainConfig(
            epochs=base.epochs if self.epochs is None else self.epochs,
            batch_size=base.batch_size if self.batch_size is None else self.batch_size,
            learning_rate=base.learning_rate if self.learning_rate is None else self.learning_rate,
            seed=self.seed,
            loss=spec.loss,
        )
        return spec, cfg

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in KNOWN_KEYS}
        return {k: v for k, v in sorted(d.items()) if v is not None}


def _int(d: dict, key: str, minimum: int) -> None:
    v = d.get(key)
    if v is None:
        return
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {v!r}")


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check cross-field rules and that model, ratio and preset all resolve."""
    d = cfg.__dict__
    _int(d, "clients", 1)
    _int(d, "epochs", 0)
    _int(d, "batch_size", 1)
    _int(d, "repeats", 1)
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed!r}")
    if cfg.learning_rate is not None and not (isinstance(cfg.learning_rate, (int, float))
                                              and cfg.learning_rate >= 0):
        raise ConfigError(f"learning_rate must be a non-negative number, got {cfg.learning_rate!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {cfg.scale!r}")
    if cfg.model is None and cfg.preset is None:
        raise ConfigError("either preset or model is required")
    kind = cfg.dataset.get("kind") if isinstance(cfg.dataset, dict) else None
    if kind not in DATASET_KINDS:
        raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}, got {kind!r}")
    if kind in ("csv", "tensor_dir") and not cfg.dataset.get("path"):
        raise ConfigError(f"dataset of kind {kind} needs a path")
    if cfg.mode == "split":
        try:
            ratio = cfg.split_ratio
        except ParseError as exc:
            raise ConfigError(f"bad ratio: {exc}") from exc
        if len(ratio.parts) != cfg.clients:
            raise ConfigError(f"ratio {cfg.ratio!r} has {len(ratio.parts)} parts for {cfg.clients} clients")
    try:
        cfg.model_and_training()
    except (SplitMeshError, ValueError) as exc:
        raise ConfigError(f"bad model: {exc}") from exc
    return cfg


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw = dict(raw)
    ds = raw.get("dataset", "synthetic")
    if isinstance(ds, str):
        ds = {"kind": ds}
    raw["dataset"] = ds
    if "ratio" in raw and raw["ratio"] is not None:
        raw["ratio"] = str(raw["ratio"])
    if "model" in raw:
        raw.setdefault("preset", None)
    try:
        cfg = ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate_config(cfg)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)
