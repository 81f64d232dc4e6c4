"""Protocol message types.

Messages compare equal exactly when their canonical encodings are equal, which
sidesteps numpy's elementwise ``==`` and treats NaN payloads consistently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..nn.losses import LossKind

PROTOCOL_VERSION = 1


class MsgType(enum.IntEnum):
    HELLO = 1
    CONFIG = 2
    ACTIVATIONS = 3
    GRADIENTS = 4
    METRICS = 5
    DONE = 6


class Phase(enum.IntEnum):
    TRAIN = 0
    EVAL = 1


class Message:
    msg_type: MsgType

    def __eq__(self, other):
        if not isinstance(other, Message):
            return NotImplemented
        from .codec import encode_message

        return encode_message(self) == encode_message(other)

    def __hash__(self):
        from .codec import encode_message

        return hash(encode_message(self))


def _f32(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float32)
    if not 1 <= arr.ndim <= 255 or 0 in arr.shape:
        raise ValueError(f"tensors need rank 1..255 and every dimension >= 1, got shape {list(arr.shape)}")
    return np.ascontiguousarray(arr)


@dataclass(eq=False)
class Hello(Message):
    client_id: int
    protocol_version: int = PROTOCOL_VERSION
    msg_type = MsgType.HELLO


@dataclass(eq=False)
class Config(Message):
    plan_hash: bytes
    epochs: int
    batch_size: int
    learning_rate: float
    seed: int
    loss: LossKind
    client_segment: str  # canonical ModelSpec JSON
    shard_size: int
    shard_sizes: tuple[int, ...] = field(default_factory=tuple)  # train rows per client, client_id order
    msg_type = MsgType.CONFIG

    def __post_init__(self):
        self.loss = LossKind(self.loss)
        self.shard_sizes = tuple(int(s) for s in self.shard_sizes)
        if len(self.plan_hash) != 32:
            raise ValueError("plan_hash is a 32-byte digest")


@dataclass(eq=False)
class Activations(Message):
    round_id: int
    client_id: int
    tensor: np.ndarray
    labels: np.ndarray
    phase: Phase = Phase.TRAIN
    msg_type = MsgType.ACTIVATIONS

    def __post_init__(self):
        self.tensor = _f32(self.tensor)
        self.labels = _f32(self.labels)
        self.phase = Phase(self.phase)
        if self.labels.ndim < 1 or self.tensor.ndim < 1 or self.labels.shape[0] != self.tensor.shape[0]:
            raise ValueError(f"labels {list(self.labels.shape)} do not match activation rows "
                             f"{list(self.tensor.shape)}")

    @property
    def rows(self) -> int:
        return self.tensor.shape[0]


@dataclass(eq=False)
class Gradients(Message):
    round_id: int
    client_id: int
    tensor: np.ndarray
    msg_type = MsgType.GRADIENTS

    def __post_init__(self):
        self.tensor = _f32(self.tensor)


@dataclass(eq=False)
class Metrics(Message):
    epoch: int
    loss: float
    metric: float
    msg_type = MsgType.METRICS


@dataclass(eq=False)
class Done(Message):
    msg_type = MsgType.DONE
