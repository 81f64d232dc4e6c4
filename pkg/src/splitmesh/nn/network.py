from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import EmptyModel, ShapeMismatch
from ..rng import SplitMix64
from .layers import Cache, LayerState, build_layer, layer_backward, layer_forward
from .specs import LayerSpec, Shape, output_shape

ForwardTrace = list[Cache]


def shape_trace(layers: Sequence[LayerSpec], input_shape: Shape) -> list[Shape]:
    """Per-layer output shapes; ShapeMismatch names the first failing layer index."""
    if not layers:
        raise EmptyModel("model has no layers")
    shapes = []
    cur = tuple(input_shape)
    for i, spec in enumerate(layers):
        try:
            cur = output_shape(spec, cur)
        except ShapeMismatch as exc:
            raise ShapeMismatch(f"layer {i} ({spec.kind}): {exc}") from None
        if any(d < 1 for d in cur):
            raise ShapeMismatch(f"layer {i} ({spec.kind}): empty output shape {list(cur)}")
        shapes.append(cur)
    return shapes


class Network:
    """An ordered stack of layer states with batched forward and backward."""

    def __init__(self, layers: list[LayerState]):
        self.layers = layers

    @classmethod
    def build(cls, specs: Sequence[LayerSpec], input_shape: Shape, rng: SplitMix64 | None = None,
              dtype=np.float32) -> "Network":
        shape_trace(specs, input_shape)
        if rng is None:
            rng = SplitMix64(0)
        states = []
        cur = tuple(input_shape)
        for spec in specs:
            st = build_layer(spec, cur, rng, dtype)
            states.append(st)
            cur = st.out_shape
        return cls(states)

    @property
    def input_shape(self) -> Shape:
        return self.layers[0].in_shape

    @property
    def output_shape(self) -> Shape:
        return self.layers[-1].out_shape

    @property
    def dtype(self):
        for st in self.layers:
            if st.params:
                return st.params[0].dtype
        return np.dtype(np.float32)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
        if any(st.params for st in self.layers):
            x = np.asarray(x, dtype=self.dtype)
        trace: ForwardTrace = []
        for st in self.layers:
            x, cache = layer_forward(x, st)
            trace.append(cache)
        return x, trace

    def backward(self, grad: np.ndarray, trace: ForwardTrace) -> np.ndarray:
        if len(trace) != len(self.layers):
            raise ShapeMismatch(f"trace has {len(trace)} entries for {len(self.layers)} layers")
        for st, cache in zip(reversed(self.layers), reversed(trace)):
            grad = layer_backward(grad, cache, st)
        return grad

    def params(self) -> list[np.ndarray]:
        return [p for st in self.layers for p in st.params]

    def grads(self) -> list[np.ndarray]:
        return [g for st in self.layers for g in st.grads]

    def zero_grads(self) -> None:
        for st in self.layers:
            st.zero_grads()

    def copy(self) -> "Network":
        return Network([LayerState(st.spec, st.in_shape, st.out_shape,
                                   [p.copy() for p in st.params],
                                   [g.copy() for g in st.grads]) for st in self.layers])


def sgd_step(states: Sequence[LayerState], lr: float) -> None:
    """params -= lr * grads, then zero the grads."""
    for st in states:
        for p, g in zip(st.params, st.grads):
            p -= p.dtype.type(lr) * g
            g.fill(0)
