from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import MissingClient, ProtocolViolation, RoundMismatch
from ..nn.losses import LossKind, loss_forward, rmsle
from ..nn.network import Network, sgd_step
from ..protocol.messages import Activations, Gradients, Metrics, Phase

ACCURACY_THRESHOLD = 0.5
# keeps log1p defined when an untrained regressor predicts <= -1
RMSLE_PRED_FLOOR = -1.0 + 1e-6


def task_metric(loss: LossKind, pred: np.ndarray, target: np.ndarray) -> float:
    """Accuracy in percent for BCE models, RMSLE for regression."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if LossKind(loss) is LossKind.BCE:
        return float(np.mean((pred >= ACCURACY_THRESHOLD) == (target == 1)) * 100.0)
    return rmsle(np.maximum(pred, RMSLE_PRED_FLOOR), target)


@dataclass
class EpochStats:
    rows: int = 0
    weighted_loss: float = 0.0
    rounds: int = 0

    def add(self, loss: float, rows: int) -> None:
        self.rows += rows
        self.weighted_loss += loss * rows
        self.rounds += 1

    @property
    def mean_loss(self) -> float:
        return self.weighted_loss / self.rows if self.rows else float("nan")


class ServerNode:
    """Holds every layer after the first hidden group and drives the loss."""

    def __init__(self, net: Network, loss: LossKind, learning_rate: float, client_ids: Iterable[int]):
        self.net = net
        self.loss = LossKind(loss)
        self.learning_rate = learning_rate
        self.client_ids = sorted(client_ids)
        self.stats = EpochStats()

    def _gather(self, acts: Sequence[Activations], expected: Iterable[int] | None, phase: Phase):
        expected = sorted(self.client_ids if expected is None else expected)
        seen = [a.client_id for a in acts]
        if len(set(seen)) != len(seen):
            raise RoundMismatch(f"duplicate activations from clients {seen}")
        missing = set(expected) - set(seen)
        if missing:
            raise MissingClient(f"no activations from clients {sorted(missing)}")
        extra = set(seen) - set(expected)
        if extra:
            raise ProtocolViolation(f"unexpected activations from clients {sorted(extra)}")
        if len({a.round_id for a in acts}) != 1:
            raise RoundMismatch(f"round ids differ across clients: {[a.round_id for a in acts]}")
        if any(a.phase is not phase for a in acts):
            raise ProtocolViolation(f"expected {phase.name} activations")
        ordered = sorted(acts, key=lambda a: a.client_id)
        x = np.concatenate([a.tensor for a in ordered], axis=0)
        y = np.concatenate([a.labels for a in ordered], axis=0)
        return ordered, x, y

    def server_round(self, acts: Sequence[Activations], expected: Iterable[int] | None = None
                     ) -> tuple[list[Gradients], float]:
        """Concatenate in client-id order, train one step, return per-client gradient slices."""
        ordered, x, y = self._gather(acts, expected, Phase.TRAIN)
        pred, trace = self.net.forward(x)
        loss, g = loss_forward(self.loss, pred, y)
        grad_in = self.net.backward(g, trace)
        sgd_step(self.net.layers, self.learning_rate)
        out, start = [], 0
        for a in ordered:
            out.append(Gradients(a.round_id, a.client_id, grad_in[start:start + a.rows]))
            start += a.rows
        self.stats.add(loss, x.shape[0])
        return out, loss

    def evaluate(self, acts: Sequence[Activations]) -> tuple[float, float]:
        """(validation loss, task metric) over every client's held-out rows."""
        _, x, y = self._gather(acts, None, Phase.EVAL)
        pred, _ = self.net.forward(x)
        loss, _ = loss_forward(self.loss, pred, y)
        return loss, task_metric(self.loss, pred, y)

    def end_epoch(self, epoch: int, metric: float) -> Metrics:
        msg = Metrics(epoch, self.stats.mean_loss, metric)
        self.stats = EpochStats()
        return msg
