"""Finite-difference checks over every layer kind and the small composed presets."""

from __future__ import annotations

from typing import Iterator

from ..model import preset
from ..nn.gradcheck import GradCheckReport, grad_check
from ..nn.losses import LossKind
from ..nn.specs import Activation, Conv2D, Dense, Flatten, MaxPool2D

# (name, layers, input shape, loss)
LAYER_CASES = (
    ("conv2d", [Conv2D(3, kernel=(3, 3))], (2, 6, 6), None),
    ("conv2d_pad_stride", [Conv2D(2, kernel=(3, 2), stride=2, padding=1)], (2, 7, 6), None),
    ("maxpool2d", [MaxPool2D((2, 2))], (2, 6, 6), None),
    ("maxpool2d_overlap", [MaxPool2D((3, 3), stride=2)], (1, 7, 7), None),
    ("dense", [Dense(4)], (5,), None),
    ("flatten", [Flatten()], (2, 3, 3), None),
    ("sigmoid", [Activation("sigmoid")], (7,), None),
    ("leaky_relu", [Activation("leaky_relu", alpha=0.01)], (7,), None),
    ("bce", [Dense(1), Activation("sigmoid")], (4,), LossKind.BCE),
    ("mse", [Dense(1)], (4,), LossKind.MSE),
)
PRESET_CASES = ("covid", "cholesterol")


def gradcheck_suite(seed: int = 0) -> Iterator[tuple[str, GradCheckReport]]:
    for name, layers, shape, loss in LAYER_CASES:
        yield name, grad_check(layers, seed=seed, input_shape=shape, loss=loss)
    for name in PRESET_CASES:
        spec, _ = preset(name, "desk")
        yield f"preset:{name}", grad_check(spec, seed=seed, batch=2)
