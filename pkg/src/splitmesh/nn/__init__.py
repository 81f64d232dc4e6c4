"""Minimal deterministic numpy neural-network engine."""

from .gradcheck import GradCheckReport, grad_check
from .layers import (
    LayerState,
    activation_backward,
    activation_forward,
    build_layer,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    flatten_backward,
    flatten_forward,
    glorot_init,
    maxpool2d_backward,
    maxpool2d_forward,
)
from .losses import LossKind, loss_forward, rmsle
from .network import ForwardTrace, Network, sgd_step, shape_trace
from .specs import Activation, Conv2D, Dense, Flatten, LayerSpec, MaxPool2D

__all__ = [
    "Activation", "Conv2D", "Dense", "Flatten", "MaxPool2D", "LayerSpec", "LayerState",
    "ForwardTrace", "GradCheckReport", "LossKind", "Network",
    "activation_backward", "activation_forward", "build_layer", "conv2d_backward",
    "conv2d_forward", "dense_backward", "dense_forward", "flatten_backward", "flatten_forward",
    "glorot_init", "grad_check", "loss_forward", "maxpool2d_backward", "maxpool2d_forward",
    "rmsle", "sgd_step", "shape_trace",
]
