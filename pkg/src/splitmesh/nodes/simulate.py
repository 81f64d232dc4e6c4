"""Single-threaded deterministic driver: every node in one process, every
message encoded, queued and decoded exactly as it would be on a socket."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import ProtocolViolation
from ..protocol.handshake import accept_handshake
from ..protocol.messages import Config, Done, Gradients, Hello, Metrics, Phase
from ..protocol.transport import QueueTransport, Transcript
from .client import ClientNode
from .schedule import Step
from .server import ServerNode

log = logging.getLogger(__name__)


@dataclass
class EpochResult:
    epoch: int
    train_loss: float
    metric: float
    seconds: float


def train(server: ServerNode, clients: Sequence[ClientNode], steps: Sequence[Step],
          make_config: Callable[[int], Config], transcript: Transcript | None = None) -> list[EpochResult]:
    """Run every step; client ids must be 0..N-1, matching ``Step.rows`` positions."""
    links = {c.client_id: QueueTransport.pair(transcript) for c in clients}
    by_id = {c.client_id: c for c in clients}
    order = sorted(by_id)
    if order != list(range(len(order))):
        raise ValueError(f"client ids must be 0..{len(order) - 1}, got {order}")

    for cid in order:
        client_end, server_end = links[cid]
        client_end.send_message(Hello(cid))
        accept_handshake(server_end, make_config, timeout=0)
        by_id[cid].configure(client_end.recv_message(timeout=0))

    results: list[EpochResult] = []
    started = time.perf_counter()
    epoch = None
    try:
        for step in steps:
            if step.epoch != epoch:
                epoch = step.epoch
                for c in clients:
                    c.start_epoch()
            active = step.active()
            for cid in active:
                c = by_id[cid]
                if step.phase is Phase.TRAIN:
                    act = c.client_round(c.take(step.rows[cid]), step.round_id)
                else:
                    act = c.eval_activations(step.round_id)
                links[cid][0].send_message(act)
            acts = [links[cid][1].recv_message(timeout=0) for cid in active]
            if step.phase is Phase.TRAIN:
                grads, loss = server.server_round(acts, expected=active)
                for g in grads:
                    links[g.client_id][1].send_message(g)
                for cid in active:
                    reply = links[cid][0].recv_message(timeout=0)
                    if not isinstance(reply, Gradients):
                        raise ProtocolViolation(f"client {cid} expected Gradients, got {type(reply).__name__}")
                    by_id[cid].client_apply_gradients(reply)
            else:
                _, metric = server.evaluate(acts)
                summary = server.end_epoch(step.epoch, metric)
                for cid in order:
                    links[cid][1].send_message(summary)
                    got = links[cid][0].recv_message(timeout=0)
                    if not isinstance(got, Metrics):
                        raise ProtocolViolation(f"client {cid} expected Metrics, got {type(got).__name__}")
                now = time.perf_counter()
                results.append(EpochResult(summary.epoch, summary.loss, summary.metric, now - started))
                log.info("epoch %d loss %.6f metric %.4f", summary.epoch, summary.loss, summary.metric)
                started = now
    finally:
        for cid in order:
            links[cid][1].send_message(Done())
            links[cid][0].send_message(Done())
    return results
