"""Model specs, the one-hidden-group client/server split, and the built-in presets.

A *hidden group* starts at each Conv2D or Dense layer and absorbs every
parameter-free layer (activation, pooling, flatten) that follows it. The
client always holds exactly the first group.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ShapeMismatch, TooShallow, UnknownPreset
from .nn.losses import LossKind
from .nn.network import shape_trace
from .nn.specs import (
    WEIGHTED,
    Activation,
    Conv2D,
    Dense,
    Flatten,
    LayerSpec,
    MaxPool2D,
    Shape,
    layer_from_dict,
    layer_to_dict,
)

SPEC_FORMAT = 1


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: Shape
    loss: LossKind = LossKind.BCE
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "loss", LossKind(self.loss))

    @property
    def is_image(self) -> bool:
        return len(self.input_shape) == 3

    def to_dict(self) -> dict:
        return {
            "format": SPEC_FORMAT,
            "name": self.name,
            "input_shape": list(self.input_shape),
            "loss": self.loss.value,
            "layers": [layer_to_dict(l) for l in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            return cls(
                layers=tuple(layer_from_dict(l) for l in d["layers"]),
                input_shape=tuple(d["input_shape"]),
                loss=LossKind(d.get("loss", "bce")),
                name=d.get("name", "custom"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model spec: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0
    loss: LossKind = LossKind.BCE

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass(frozen=True)
class SplitPlan:
    model: ModelSpec
    client_segment: ModelSpec
    server_segment: ModelSpec
    cut_after_hidden: int = 1

    @property
    def client_layers(self) -> int:
        return len(self.client_segment.layers)

    def hash(self) -> bytes:
        return plan_hash(self.model)


def plan_hash(spec: ModelSpec) -> bytes:
    return hashlib.sha256(spec.to_json().encode()).digest()


def validate_model(spec: ModelSpec, require_scalar: bool = True) -> list[Shape]:
    """Shape after every layer; fails before anything is allocated or sent."""
    shapes = shape_trace(spec.layers, spec.input_shape)
    if require_scalar and shapes[-1] != (1,):
        raise ShapeMismatch(f"model must end in one output per sample, ends in {list(shapes[-1])}")
    return shapes


def hidden_groups(layers: Sequence[LayerSpec]) -> list[list[LayerSpec]]:
    groups: list[list[LayerSpec]] = []
    for spec in layers:
        if isinstance(spec, WEIGHTED) or not groups:
            groups.append([spec])
        else:
            groups[-1].append(spec)
    return groups


def split_model(spec: ModelSpec) -> SplitPlan:
    shapes = validate_model(spec)
    groups = hidden_groups(spec.layers)
    if sum(1 for g in groups if any(isinstance(l, WEIGHTED) for l in g)) < 2:
        raise TooShallow(f"{spec.name} has fewer than two hidden groups; nothing left for the server")
    cut = len(groups[0])
    client = replace(spec, layers=spec.layers[:cut], name=f"{spec.name}/client")
    server = replace(spec, layers=spec.layers[cut:], input_shape=shapes[cut - 1], name=f"{spec.name}/server")
    return SplitPlan(spec, client, server)


def join_plan(plan: SplitPlan) -> tuple[LayerSpec, ...]:
    return plan.client_segment.layers + plan.server_segment.layers


# presets

def _conv_group(ch: int, act: str, pool: bool = True) -> list[LayerSpec]:
    out: list[LayerSpec] = [Conv2D(ch, (3, 3), 1, 1), Activation(act)]
    if pool:
        out.append(MaxPool2D((2, 2), 2))
    return out


def _covid(channels: Sequence[int]) -> list[LayerSpec]:
    layers: list[LayerSpec] = []
    for ch in channels:
        layers += _conv_group(ch, "sigmoid")
    return layers + [Flatten(), Dense(1), Activation("sigmoid")]


def _vgg19(client_ch: int, blocks: Sequence[tuple[int, int]], dense: int) -> list[LayerSpec]:
    # one client conv group, then the 16 conv + 3 dense weight layers of VGG19
    layers = _conv_group(client_ch, "sigmoid")
    for ch, reps in blocks:
        for r in range(reps):
            layers += _conv_group(ch, "sigmoid", pool=(r == reps - 1))
    layers += [Flatten(), Dense(dense), Activation("sigmoid"), Dense(dense), Activation("sigmoid"),
               Dense(1), Activation("sigmoid")]
    return layers


def _cholesterol(widths: Sequence[int], alpha: float) -> list[LayerSpec]:
    layers: list[LayerSpec] = []
    for w in widths:
        layers += [Dense(w), Activation("leaky_relu", alpha)]
    return layers + [Dense(1)]


VGG19_BLOCKS = ((64, 2), (128, 2), (256, 4), (512, 4), (512, 4))
CHOLESTEROL_FEATURES = ("age", "sex", "height", "weight", "tc", "hdl_c", "tg")
CHOLESTEROL_TARGET = "ldl_c"
LEAKY_ALPHA = 0.01

# Descriptive metadata the specs cannot carry themselves.
REFERENCE_SETUP = {
    "covid": {"model": "Custom classification", "input_size": "64x64x1"},
    "mura": {"model": "VGG19", "input_size": "224x224x1"},
    "cholesterol": {"model": "Custom regression", "input_size": "326032", "dataset_rows": 326_032},
}

PRESETS = ("covid", "mura", "cholesterol")
SCALES = ("paper", "desk")


def preset(name: str, scale: str = "desk") -> tuple[ModelSpec, TrainConfig]:
    if scale not in SCALES:
        raise UnknownPreset(f"unknown scale {scale!r}; expected one of {SCALES}")
    full = scale == "paper"
    if name == "covid":
        if full:
            spec = ModelSpec(_covid((16, 32, 64, 64)), (1, 64, 64), LossKind.BCE, "covid")
            cfg = TrainConfig(epochs=100, batch_size=64, learning_rate=0.01, loss=LossKind.BCE)
        else:
            spec = ModelSpec(_covid((4, 8, 8, 8)), (1, 16, 16), LossKind.BCE, "covid-desk")
            cfg = TrainConfig(epochs=3, batch_size=64, learning_rate=0.5, loss=LossKind.BCE)
    elif name == "mura":
        if full:
            spec = ModelSpec(_vgg19(64, VGG19_BLOCKS, 4096), (1, 224, 224), LossKind.BCE, "mura")
            cfg = TrainConfig(epochs=50, batch_size=128, learning_rate=0.01, loss=LossKind.BCE)
        else:
            blocks = ((2, 2), (4, 2), (4, 4), (8, 4), (8, 4))
            spec = ModelSpec(_vgg19(2, blocks, 8), (1, 64, 64), LossKind.BCE, "mura-desk")
            cfg = TrainConfig(epochs=2, batch_size=32, learning_rate=0.5, loss=LossKind.BCE)
    elif name == "cholesterol":
        width = len(CHOLESTEROL_FEATURES)
        if full:
            spec = ModelSpec(_cholesterol((32, 16), LEAKY_ALPHA), (width,), LossKind.MSE, "cholesterol")
            cfg = TrainConfig(epochs=200, batch_size=2048, learning_rate=0.01, loss=LossKind.MSE)
        else:
            spec = ModelSpec(_cholesterol((8, 4), LEAKY_ALPHA), (width,), LossKind.MSE, "cholesterol-desk")
            cfg = TrainConfig(epochs=3, batch_size=64, learning_rate=0.05, loss=LossKind.MSE)
    else:
        raise UnknownPreset(f"unknown preset {name!r}; expected one of {PRESETS}")
    return spec, cfg


def init_networks(plan: SplitPlan, seed: int, dtype=None):
    """Glorot-initialise the whole model from one stream, then cut it in two.

    The client segment consumes the first draws, so a client can rebuild its
    own starting weights from the seed without knowing the server segment.
    """
    import numpy as np

    from .nn.network import Network
    from .rng import SplitMix64

    full = Network.build(plan.model.layers, plan.model.input_shape, SplitMix64(seed),
                         dtype=dtype or np.float32)
    cut = plan.client_layers
    return Network(full.layers[:cut]), Network(full.layers[cut:])
