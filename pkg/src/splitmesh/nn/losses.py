from __future__ import annotations

import enum
import math

import numpy as np

from ..errors import DomainError, InvalidTarget, ShapeMismatch

BCE_EPS = 1e-7


class LossKind(str, enum.Enum):
    BCE = "bce"
    MSE = "mse"


def _align(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target)
    if target.shape != pred.shape:
        if target.size == pred.size and pred.ndim == 2 and pred.shape[1] == 1 and target.ndim == 1:
            return target.reshape(pred.shape).astype(pred.dtype, copy=False)
        raise ShapeMismatch(f"prediction shape {list(pred.shape)} vs target shape {list(target.shape)}")
    return target.astype(pred.dtype, copy=False)


def loss_forward(kind: LossKind | str, pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over all elements and its gradient with respect to ``pred``.

    ``target`` may be ``[N]`` when ``pred`` is ``[N, 1]``. The gradient has the
    dtype and shape of ``pred``.
    """
    kind = LossKind(kind)
    y = _align(pred, target)
    n = pred.size
    if kind is LossKind.BCE:
        if not np.all((y == 0) | (y == 1)):
            raise InvalidTarget("binary cross-entropy targets must be 0 or 1")
        one = pred.dtype.type(1)
        p = np.clip(pred, BCE_EPS, 1 - BCE_EPS).astype(pred.dtype, copy=False)
        terms = y * np.log(p) + (one - y) * np.log(one - p)
        loss = -terms.mean()
        inside = (pred > BCE_EPS) & (pred < 1 - BCE_EPS)
        grad = np.where(inside, (p - y) / (p * (one - p)), 0).astype(pred.dtype) / pred.dtype.type(n)
        return float(loss), grad
    diff = pred - y
    loss = (diff * diff).mean()
    grad = diff * pred.dtype.type(2.0 / n)
    return float(loss), grad


def rmsle(pred, target) -> float:
    """sqrt(mean((ln(1+p) - ln(1+y))**2)), computed in float64."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    y = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ShapeMismatch(f"rmsle: {p.size} predictions vs {y.size} targets")
    if p.size == 0:
        raise ShapeMismatch("rmsle needs at least one value")
    if np.any(p <= -1) or np.any(y <= -1):
        raise DomainError("rmsle is undefined for values <= -1")
    d = np.log1p(p) - np.log1p(y)
    return math.sqrt(float(np.mean(d * d)))
