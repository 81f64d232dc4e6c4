"""Central finite-difference check of every analytic gradient in float64."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..rng import SplitMix64
from .losses import LossKind, loss_forward
from .network import Network
from .specs import LayerSpec, Shape

STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-7
MAX_ELEMENTS = 10_000


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    checked: int
    worst: str = ""


def elementwise_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Relative error per element.

    Where both values are below ABS_FLOOR in magnitude the element is judged on
    absolute difference instead: 0 if within the floor, else the raw difference
    divided by the floor.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    tiny = scale <= ABS_FLOOR
    rel = diff / np.where(tiny, ABS_FLOOR, scale)
    return np.where(tiny & (diff <= ABS_FLOOR), 0.0, rel)


def grad_check(spec, seed: int = 0, input_shape: Shape | None = None, batch: int = 3,
               loss: LossKind | str | None = None) -> GradCheckReport:
    """Compare backprop to finite differences for a layer, layer list or ModelSpec.

    With a loss the objective is the mean loss over a random batch; without one
    it is ``sum(output * R)`` for a fixed random projection ``R``.
    """
    if hasattr(spec, "layers"):
        layers: Sequence[LayerSpec] = list(spec.layers)
        input_shape = input_shape or spec.input_shape
        if loss is None:
            loss = spec.loss
    elif isinstance(spec, (list, tuple)):
        layers = list(spec)
    else:
        layers = [spec]
    if input_shape is None:
        raise ValueError("grad_check needs an input shape for bare layers")

    rng = SplitMix64(seed)
    net = Network.build(layers, input_shape, rng, dtype=np.float64)
    x = rng.normal_array(batch * int(np.prod(input_shape))).reshape((batch,) + tuple(input_shape))
    out_shape = (batch,) + net.output_shape
    if loss is not None and LossKind(loss) is LossKind.BCE:
        target = (rng.uniform_array(int(np.prod(out_shape))) < 0.5).astype(np.float64).reshape(out_shape)
    else:
        target = rng.normal_array(int(np.prod(out_shape))).reshape(out_shape)

    total = x.size + sum(p.size for p in net.params())
    if total > MAX_ELEMENTS:
        raise ValueError(f"{total} elements exceed the finite-difference budget of {MAX_ELEMENTS}")

    def objective(inp: np.ndarray):
        y, trace = net.forward(inp)
        if loss is None:
            return float(np.sum(y * target)), target.copy(), trace
        val, g = loss_forward(loss, y, target)
        return val, g, trace

    net.zero_grads()
    _, g_out, trace = objective(x)
    grad_x = net.backward(g_out, trace)
    analytic = [grad_x] + [g.copy() for g in net.grads()]
    net.zero_grads()

    def f(inp):
        return objective(inp)[0]

    tensors = [x] + net.params()
    names = ["input"] + [f"layer{i}.{'weight' if j == 0 else 'bias'}"
                         for i, st in enumerate(net.layers) for j in range(len(st.params))]
    worst, worst_where, checked = 0.0, "", 0
    for name, t, a in zip(names, tensors, analytic):
        numeric = np.zeros_like(t)
        flat = t.reshape(-1)
        num_flat = numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + STEP
            fp = f(x)
            flat[k] = orig - STEP
            fm = f(x)
            flat[k] = orig
            num_flat[k] = (fp - fm) / (2 * STEP)
        err = elementwise_error(a, numeric)
        checked += err.size
        if err.size and err.max() > worst:
            worst = float(err.max())
            worst_where = f"{name}[{int(err.argmax())}]"
    return GradCheckReport(worst, worst < REL_TOL, checked, worst_where)
