from __future__ import annotations

import numpy as np

from ..data.datasets import Dataset
from ..errors import NotConfigured, OutOfShard, ProtocolViolation, ShapeMismatch, StaleRound
from ..model import ModelSpec, plan_hash
from ..nn.network import ForwardTrace, Network, sgd_step
from ..protocol.messages import Activations, Config, Gradients, Phase
from ..rng import SHUFFLE, SplitMix64, derive_seed


class ClientNode:
    """One site: its private shard and the first hidden group of the model.

    Only first-group outputs (plus labels) ever leave this object.
    """

    def __init__(self, client_id: int, train: Dataset, val: Dataset, net: Network, seed: int,
                 model: ModelSpec | None = None):
        self.client_id = client_id
        self.train = train
        self.val = val
        self.net = net
        self.model = model
        self.rng = SplitMix64(derive_seed(seed, SHUFFLE, client_id))
        self.config: Config | None = None
        self.order: list[int] = []
        self.cursor = 0
        self.pending: tuple[int, ForwardTrace] | None = None
        self.last_round = 0

    @property
    def configured(self) -> bool:
        return self.config is not None

    def configure(self, config: Config) -> None:
        if config.shard_size != len(self.train):
            raise ProtocolViolation(f"server assigned {config.shard_size} rows, client {self.client_id} "
                                    f"holds {len(self.train)}")
        if self.model is not None and config.plan_hash != plan_hash(self.model):
            raise ProtocolViolation("server model plan differs from the client's")
        segment = ModelSpec.from_json(config.client_segment)
        if tuple(segment.layers) != tuple(st.spec for st in self.net.layers):
            raise ProtocolViolation("server-sent client segment differs from the local one")
        self.config = config

    def start_epoch(self) -> None:
        """Seeded Fisher-Yates reshuffle of the training rows."""
        self.order = self.rng.permutation(len(self.train))
        self.cursor = 0

    def take(self, rows: int) -> list[int]:
        idx = self.order[self.cursor:self.cursor + rows]
        if len(idx) != rows:
            raise OutOfShard(f"client {self.client_id} has {len(self.order) - self.cursor} rows left, "
                             f"asked for {rows}")
        self.cursor += rows
        return idx

    def client_round(self, indices, round_id: int) -> Activations:
        if not self.configured:
            raise NotConfigured(f"client {self.client_id} has no session config")
        if round_id <= self.last_round:
            raise StaleRound(f"round {round_id} does not follow round {self.last_round}")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= len(self.train):
            raise OutOfShard(f"indices outside shard of {len(self.train)} rows")
        x = self.train.features[idx]
        out, trace = self.net.forward(x)
        self.pending = (round_id, trace)
        self.last_round = round_id
        return Activations(round_id, self.client_id, out, self.train.labels[idx], Phase.TRAIN)

    def client_apply_gradients(self, grads: Gradients) -> None:
        if self.pending is None or grads.round_id != self.pending[0]:
            expected = None if self.pending is None else self.pending[0]
            raise StaleRound(f"gradients for round {grads.round_id}, client waiting on {expected}")
        if grads.client_id != self.client_id:
            raise ProtocolViolation(f"gradients addressed to client {grads.client_id}")
        _, trace = self.pending
        if grads.tensor.shape[0] != trace[0].batch:
            raise ShapeMismatch(f"{grads.tensor.shape[0]} gradient rows for a {trace[0].batch}-row batch")
        self.net.backward(grads.tensor, trace)
        sgd_step(self.net.layers, self.config.learning_rate)
        self.pending = None

    def eval_activations(self, round_id: int) -> Activations:
        if not self.configured:
            raise NotConfigured(f"client {self.client_id} has no session config")
        self.last_round = round_id
        out, _ = self.net.forward(self.val.features)
        return Activations(round_id, self.client_id, out, self.val.labels, Phase.EVAL)
