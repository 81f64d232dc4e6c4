"""Forward/backward kernels for each layer kind.

Tensors are numpy arrays in NCHW (images) or NF (flat) layout. Every backward
*accumulates* into ``state.grads``; :func:`splitmesh.nn.network.sgd_step`
consumes and zeroes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch
from ..rng import SplitMix64
from .specs import Activation, Conv2D, Dense, Flatten, LayerSpec, MaxPool2D, Shape, output_shape


@dataclass
class LayerState:
    spec: LayerSpec
    in_shape: Shape
    out_shape: Shape
    params: list[np.ndarray] = field(default_factory=list)
    grads: list[np.ndarray] = field(default_factory=list)

    def zero_grads(self) -> None:
        for g in self.grads:
            g.fill(0)


def fans(spec: LayerSpec, in_shape: Shape) -> tuple[int, int]:
    if isinstance(spec, Conv2D):
        kh, kw = spec.kernel
        return in_shape[0] * kh * kw, spec.out_channels * kh * kw
    if isinstance(spec, Dense):
        return in_shape[0], spec.out_features
    raise TypeError(f"{spec.kind} has no parameters")


def glorot_init(spec: LayerSpec, fan_in: int, fan_out: int, rng: SplitMix64,
                dtype=np.float32) -> list[np.ndarray]:
    """Uniform(-L, L) weights with L = sqrt(6 / (fan_in + fan_out)), zero bias.

    Weights consume ``rng`` in row-major order; the bias consumes nothing.
    """
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    if isinstance(spec, Conv2D):
        kh, kw = spec.kernel
        shape = (spec.out_channels, fan_in // (kh * kw), kh, kw)
        bias = spec.out_channels
    elif isinstance(spec, Dense):
        shape = (spec.out_features, fan_in)
        bias = spec.out_features
    else:
        return []
    count = math.prod(shape)
    u = rng.uniform_array(count)
    w = ((2.0 * u - 1.0) * limit).astype(dtype).reshape(shape)
    return [w, np.zeros(bias, dtype=dtype)]


def build_layer(spec: LayerSpec, in_shape: Shape, rng: SplitMix64 | None = None,
                dtype=np.float32) -> LayerState:
    out = output_shape(spec, in_shape)
    state = LayerState(spec, tuple(in_shape), out)
    if isinstance(spec, (Conv2D, Dense)):
        fi, fo = fans(spec, in_shape)
        if rng is None:
            rng = SplitMix64(0)
        state.params = glorot_init(spec, fi, fo, rng, dtype)
        state.grads = [np.zeros_like(p) for p in state.params]
    return state


def _check_batch(x: np.ndarray, state: LayerState, what: str) -> None:
    if tuple(x.shape[1:]) != state.in_shape:
        raise ShapeMismatch(f"{state.spec.kind} {what}: expected [N,{','.join(map(str, state.in_shape))}], "
                            f"got {list(x.shape)}")


def _check_grad(grad: np.ndarray, cache: Any, state: LayerState) -> None:
    if tuple(grad.shape[1:]) != state.out_shape or grad.shape[0] != cache.batch:
        raise ShapeMismatch(f"{state.spec.kind} backward: grad shape {list(grad.shape)} does not match "
                            f"forward output [{cache.batch},{','.join(map(str, state.out_shape))}]")


@dataclass
class Cache:
    batch: int
    x: np.ndarray | None = None
    aux: Any = None


# conv2d

def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    v = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return v[:, :, ::stride, ::stride]


def conv2d_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    spec: Conv2D = state.spec
    if x.ndim != 4 or (state.params and x.shape[1] != state.params[0].shape[1]):
        raise ShapeMismatch(f"conv2d: input {list(x.shape)} incompatible with weight "
                            f"{list(state.params[0].shape)}")
    _check_batch(x, state, "forward")
    w, b = state.params
    p = spec.padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(xp, *spec.kernel, spec.stride)
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # N,H',W',K
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += b[None, :, None, None]
    return y, Cache(x.shape[0], x)


def conv2d_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    _check_grad(grad, cache, state)
    spec: Conv2D = state.spec
    w, _ = state.params
    kh, kw = spec.kernel
    s, p = spec.stride, spec.padding
    x = cache.x
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(xp, kh, kw, s)
    state.grads[0] += np.tensordot(grad, win, axes=([0, 2, 3], [0, 2, 3]))
    state.grads[1] += grad.sum(axis=(0, 2, 3))
    ho, wo = grad.shape[2], grad.shape[3]
    dxp = np.zeros(xp.shape, dtype=grad.dtype)
    for u in range(kh):
        for v in range(kw):
            contrib = np.tensordot(grad, w[:, :, u, v], axes=([1], [0]))  # N,H',W',C
            dxp[:, :, u:u + s * (ho - 1) + 1:s, v:v + s * (wo - 1) + 1:s] += contrib.transpose(0, 3, 1, 2)
    if p:
        return dxp[:, :, p:-p, p:-p].copy()
    return dxp


# maxpool2d

def maxpool2d_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    _check_batch(x, state, "forward")
    spec: MaxPool2D = state.spec
    wh, ww = spec.window
    win = _windows(x, wh, ww, spec.stride)
    n, c, ho, wo = win.shape[:4]
    flat = win.reshape(n, c, ho, wo, wh * ww)
    # np.argmax returns the first maximal element: row-major tie rule
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), Cache(n, None, (arg, x.shape))


def maxpool2d_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    _check_grad(grad, cache, state)
    spec: MaxPool2D = state.spec
    arg, in_full = cache.aux
    ww = spec.window[1]
    s = spec.stride
    n, c, ho, wo = grad.shape
    ii = np.arange(ho)[None, None, :, None] * s + arg // ww
    jj = np.arange(wo)[None, None, None, :] * s + arg % ww
    nn_ = np.broadcast_to(np.arange(n)[:, None, None, None], arg.shape)
    cc = np.broadcast_to(np.arange(c)[None, :, None, None], arg.shape)
    dx = np.zeros(in_full, dtype=grad.dtype)
    np.add.at(dx, (nn_, cc, ii, jj), grad)
    return dx


# dense

def dense_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    w, b = state.params
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"dense: input {list(x.shape)} incompatible with weight {list(w.shape)}")
    return x @ w.T + b, Cache(x.shape[0], x)


def dense_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    _check_grad(grad, cache, state)
    w, _ = state.params
    state.grads[0] += grad.T @ cache.x
    state.grads[1] += grad.sum(axis=0)
    return grad @ w


# flatten

def flatten_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    _check_batch(x, state, "forward")
    return x.reshape(x.shape[0], -1), Cache(x.shape[0])


def flatten_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    _check_grad(grad, cache, state)
    return grad.reshape((grad.shape[0],) + state.in_shape)


# activations

def sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def leaky_relu(x: np.ndarray, alpha: float) -> np.ndarray:
    return np.where(x > 0, x, x * x.dtype.type(alpha))


def activation_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    _check_batch(x, state, "forward")
    spec: Activation = state.spec
    if spec.fn == "sigmoid":
        y = sigmoid(x).astype(x.dtype, copy=False)
        return y, Cache(x.shape[0], None, y)
    return leaky_relu(x, spec.alpha), Cache(x.shape[0], x)


def activation_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    _check_grad(grad, cache, state)
    spec: Activation = state.spec
    if spec.fn == "sigmoid":
        y = cache.aux
        return grad * (y * (1 - y))
    x = cache.x
    return np.where(x > 0, grad, grad * grad.dtype.type(spec.alpha))


FORWARD = {
    Conv2D: conv2d_forward,
    MaxPool2D: maxpool2d_forward,
    Dense: dense_forward,
    Flatten: flatten_forward,
    Activation: activation_forward,
}

BACKWARD = {
    Conv2D: conv2d_backward,
    MaxPool2D: maxpool2d_backward,
    Dense: dense_backward,
    Flatten: flatten_backward,
    Activation: activation_backward,
}


def layer_forward(x: np.ndarray, state: LayerState) -> tuple[np.ndarray, Cache]:
    return FORWARD[type(state.spec)](x, state)


def layer_backward(grad: np.ndarray, cache: Cache, state: LayerState) -> np.ndarray:
    return BACKWARD[type(state.spec)](grad, cache, state)
