"""Declarative layer descriptions and per-sample shape inference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..errors import ShapeMismatch

Shape = tuple[int, ...]


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    a, b = v
    return (int(a), int(b))


def _positive(name: str, *values: int) -> None:
    for v in values:
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: int = 1
    padding: int = 0
    in_channels: Optional[int] = None  # checked when declared, inferred otherwise
    kind = "conv2d"

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        _positive("conv2d out_channels/kernel/stride", self.out_channels, *self.kernel, self.stride)
        if self.padding < 0:
            raise ValueError("conv2d padding must be >= 0")
        if self.in_channels is not None:
            _positive("conv2d in_channels", self.in_channels)


@dataclass(frozen=True)
class MaxPool2D:
    window: tuple[int, int] = (2, 2)
    stride: Optional[int] = None  # defaults to the window height
    kind = "maxpool2d"

    def __post_init__(self):
        object.__setattr__(self, "window", _pair(self.window))
        if self.stride is None:
            object.__setattr__(self, "stride", self.window[0])
        _positive("maxpool2d window/stride", *self.window, self.stride)


@dataclass(frozen=True)
class Dense:
    out_features: int
    in_features: Optional[int] = None
    kind = "dense"

    def __post_init__(self):
        _positive("dense out_features", self.out_features)
        if self.in_features is not None:
            _positive("dense in_features", self.in_features)


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"


@dataclass(frozen=True)
class Activation:
    fn: str = "sigmoid"
    alpha: float = 0.01
    kind = "activation"

    def __post_init__(self):
        if self.fn not in ("sigmoid", "leaky_relu"):
            raise ValueError(f"unknown activation {self.fn!r}")
        if self.fn == "leaky_relu" and not 0.0 < self.alpha < 1.0:
            raise ValueError("leaky_relu alpha must lie in (0, 1)")


LayerSpec = Union[Conv2D, MaxPool2D, Dense, Flatten, Activation]
WEIGHTED = (Conv2D, Dense)


def conv_out(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def output_shape(spec: LayerSpec, in_shape: Shape) -> Shape:
    """Per-sample output shape of ``spec`` applied to ``in_shape``; raises ShapeMismatch."""
    if isinstance(spec, Conv2D):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"conv2d expects [C,H,W] input, got {list(in_shape)}")
        c, h, w = in_shape
        if spec.in_channels is not None and spec.in_channels != c:
            raise ShapeMismatch(f"conv2d declares {spec.in_channels} input channels, input has {c}")
        kh, kw = spec.kernel
        if h + 2 * spec.padding < kh or w + 2 * spec.padding < kw:
            raise ShapeMismatch(f"conv2d kernel {kh}x{kw} larger than padded input {h}x{w}")
        return (spec.out_channels, conv_out(h, kh, spec.stride, spec.padding),
                conv_out(w, kw, spec.stride, spec.padding))
    if isinstance(spec, MaxPool2D):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"maxpool2d expects [C,H,W] input, got {list(in_shape)}")
        c, h, w = in_shape
        wh, ww = spec.window
        if h < wh or w < ww:
            raise ShapeMismatch(f"maxpool2d window {wh}x{ww} does not fit input {h}x{w}")
        return (c, conv_out(h, wh, spec.stride, 0), conv_out(w, ww, spec.stride, 0))
    if isinstance(spec, Dense):
        if len(in_shape) != 1:
            raise ShapeMismatch(f"dense expects flat input, got {list(in_shape)}; add a Flatten")
        if spec.in_features is not None and spec.in_features != in_shape[0]:
            raise ShapeMismatch(f"dense declares {spec.in_features} input features, input has {in_shape[0]}")
        return (spec.out_features,)
    if isinstance(spec, Flatten):
        n = 1
        for d in in_shape:
            n *= d
        return (n,)
    if isinstance(spec, Activation):
        return tuple(in_shape)
    raise TypeError(f"not a layer spec: {spec!r}")


def layer_to_dict(spec: LayerSpec) -> dict:
    if isinstance(spec, Conv2D):
        d = {"kind": "conv2d", "out_channels": spec.out_channels, "kernel": list(spec.kernel),
             "stride": spec.stride, "padding": spec.padding}
        if spec.in_channels is not None:
            d["in_channels"] = spec.in_channels
        return d
    if isinstance(spec, MaxPool2D):
        return {"kind": "maxpool2d", "window": list(spec.window), "stride": spec.stride}
    if isinstance(spec, Dense):
        d = {"kind": "dense", "out_features": spec.out_features}
        if spec.in_features is not None:
            d["in_features"] = spec.in_features
        return d
    if isinstance(spec, Flatten):
        return {"kind": "flatten"}
    if isinstance(spec, Activation):
        d = {"kind": "activation", "fn": spec.fn}
        if spec.fn == "leaky_relu":
            d["alpha"] = spec.alpha
        return d
    raise TypeError(f"not a layer spec: {spec!r}")


_KINDS = {"conv2d": Conv2D, "maxpool2d": MaxPool2D, "dense": Dense,
          "flatten": Flatten, "activation": Activation}


def layer_from_dict(d: dict) -> LayerSpec:
    d = dict(d)
    try:
        cls = _KINDS[d.pop("kind")]
    except KeyError as exc:
        raise ValueError(f"bad layer kind in {d!r}") from exc
    if cls is Activation and d.get("fn") != "leaky_relu":
        d.pop("alpha", None)
    return cls(**d)
