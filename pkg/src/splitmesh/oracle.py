"""Monolithic reference training.

One process, no nodes, no messages: a single network whose first hidden group
is replicated once per data source, with each batch row routed through the
copy belonging to the source it came from. With one source this is plain
training. Batches are the interleaved union of per-source sub-batches in
source order, so a correct split run must match it bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.datasets import Dataset
from .data.partition import round_schedule
from .model import SplitPlan, init_networks
from .nn.losses import LossKind, loss_forward
from .nn.network import Network, sgd_step
from .nodes.server import task_metric
from .nodes.simulate import EpochResult
from .rng import SHUFFLE, SplitMix64, derive_seed


@dataclass
class OracleRun:
    results: list[EpochResult]
    first_layers: list[Network]
    rest: Network


def train_monolithic(plan: SplitPlan, sources: Sequence[tuple[Dataset, Dataset]], epochs: int,
                     batch_size: int, learning_rate: float, seed: int) -> OracleRun:
    """``sources`` holds (train, validation) per data source, in source order."""
    first, rest = init_networks(plan, seed)
    bank = [first.copy() for _ in sources]
    loss_kind = LossKind(plan.model.loss)
    rngs = [SplitMix64(derive_seed(seed, SHUFFLE, i)) for i in range(len(sources))]
    sizes = [len(tr) for tr, _ in sources]
    rounds = round_schedule(batch_size, sizes) if epochs else []
    lr = learning_rate

    results = []
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        orders = [rng.permutation(n) for rng, n in zip(rngs, sizes)]
        cursors = [0] * len(sources)
        total_rows, weighted = 0, 0.0
        for alloc in rounds:
            feats, labels, traces, live = [], [], [], []
            for i, rows in enumerate(alloc):
                if rows == 0:
                    continue
                idx = np.asarray(orders[i][cursors[i]:cursors[i] + rows], dtype=np.int64)
                cursors[i] += rows
                h, tr = bank[i].forward(sources[i][0].features[idx])
                feats.append(h)
                labels.append(sources[i][0].labels[idx])
                traces.append(tr)
                live.append(i)
            x = np.concatenate(feats, axis=0)
            y = np.concatenate(labels, axis=0)
            pred, trace = rest.forward(x)
            loss, g = loss_forward(loss_kind, pred, y)
            grad_x = rest.backward(g, trace)
            sgd_step(rest.layers, lr)
            start = 0
            for i, h, tr in zip(live, feats, traces):
                bank[i].backward(grad_x[start:start + h.shape[0]], tr)
                sgd_step(bank[i].layers, lr)
                start += h.shape[0]
            total_rows += x.shape[0]
            weighted += loss * x.shape[0]

        val_h = [bank[i].forward(va.features)[0] for i, (_, va) in enumerate(sources)]
        val_y = np.concatenate([va.labels for _, va in sources], axis=0)
        pred, _ = rest.forward(np.concatenate(val_h, axis=0))
        metric = task_metric(loss_kind, pred, val_y)
        mean_loss = weighted / total_rows if total_rows else float("nan")
        results.append(EpochResult(epoch, mean_loss, metric, time.perf_counter() - t0))
    return OracleRun(results, bank, rest)
