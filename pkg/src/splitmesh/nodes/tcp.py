"""Concurrent deployment over TCP.

The server runs one handler thread per client connection. Handlers meet at a
:class:`RoundBarrier`; the last one to arrive for a round runs the server step
and everybody picks up their own reply. That barrier is the only shared state.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from typing import Callable, Sequence

from ..errors import MissingClient, ProtocolViolation, RoundMismatch, SplitMeshError
from ..protocol.handshake import accept_handshake, handshake
from ..protocol.messages import Activations, Config, Done, Gradients, Message, Metrics, Phase
from ..protocol.transport import TcpTransport, Transcript, Transport
from .client import ClientNode
from .schedule import Step, plan_steps
from .server import ServerNode
from .simulate import EpochResult

log = logging.getLogger(__name__)


class RoundBarrier:
    def __init__(self, server: ServerNode, timeout: float | None = 60.0):
        self.server = server
        self.timeout = timeout
        self.cond = threading.Condition()
        self.pending: dict[int, dict[int, Activations]] = {}
        self.replies: dict[int, dict[int, Message]] = {}
        self.error: BaseException | None = None
        self.results: list[EpochResult] = []
        self._epoch_start = time.perf_counter()

    def fail(self, exc: BaseException) -> None:
        with self.cond:
            if self.error is None:
                self.error = exc
            self.cond.notify_all()

    def _compute(self, step: Step, acts: list[Activations]) -> dict[int, Message]:
        if step.phase is Phase.TRAIN:
            grads, _ = self.server.server_round(acts, expected=step.active())
            return {g.client_id: g for g in grads}
        _, metric = self.server.evaluate(acts)
        summary = self.server.end_epoch(step.epoch, metric)
        now = time.perf_counter()
        self.results.append(EpochResult(summary.epoch, summary.loss, summary.metric, now - self._epoch_start))
        self._epoch_start = now
        log.info("epoch %d loss %.6f metric %.4f", summary.epoch, summary.loss, summary.metric)
        return {cid: summary for cid in step.active()}

    def submit(self, step: Step, act: Activations) -> Message:
        with self.cond:
            if self.error is not None:
                raise self.error
            if act.round_id != step.round_id or act.phase is not step.phase:
                exc = RoundMismatch(f"client {act.client_id} sent round {act.round_id}/{act.phase.name}, "
                                    f"server is on {step.round_id}/{step.phase.name}")
                self.error = exc
                self.cond.notify_all()
                raise exc
            bucket = self.pending.setdefault(step.round_id, {})
            bucket[act.client_id] = act
            if len(bucket) == len(step.active()):
                del self.pending[step.round_id]
                try:
                    self.replies[step.round_id] = self._compute(step, list(bucket.values()))
                except BaseException as exc:
                    self.error = exc
                    self.cond.notify_all()
                    raise
                self.cond.notify_all()
            else:
                ok = self.cond.wait_for(lambda: step.round_id in self.replies or self.error is not None,
                                        timeout=self.timeout)
                if self.error is not None:
                    raise self.error
                if not ok:
                    missing = sorted(set(step.active()) - set(bucket))
                    exc = MissingClient(f"round {step.round_id}: no activations from clients {missing} "
                                        f"within {self.timeout}s")
                    self.error = exc
                    self.cond.notify_all()
                    raise exc
            box = self.replies[step.round_id]
            reply = box.pop(act.client_id)
            if not box:
                del self.replies[step.round_id]
            return reply


def _serve_client(transport: Transport, barrier: RoundBarrier, steps: Sequence[Step],
                  make_config: Callable[[int], Config], timeout: float | None) -> None:
    session = accept_handshake(transport, make_config, timeout=timeout)
    cid = session.client_id
    for step in steps:
        if cid not in step.active():
            continue
        msg = transport.recv_message(timeout)
        if isinstance(msg, Done):
            raise ProtocolViolation(f"client {cid} left before round {step.round_id}")
        if not isinstance(msg, Activations) or msg.client_id != cid:
            raise ProtocolViolation(f"client {cid}: expected its Activations, got {type(msg).__name__}")
        transport.send_message(barrier.submit(step, msg))
    transport.send_message(Done())
    bye = transport.recv_message(timeout)
    if not isinstance(bye, Done):
        raise ProtocolViolation(f"client {cid}: expected Done, got {type(bye).__name__}")


def serve(server: ServerNode, steps: Sequence[Step], make_config: Callable[[int], Config],
          listen: tuple[str, int], timeout: float | None = 60.0, transcript: Transcript | None = None,
          ready: threading.Event | None = None, bound: list | None = None) -> list[EpochResult]:
    """Accept one connection per expected client, then train to completion.

    ``bound`` (if given) receives the actual (host, port), useful with port 0.
    """
    barrier = RoundBarrier(server, timeout)
    expected = len(server.client_ids)
    claimed: set[int] = set()
    claim_lock = threading.Lock()

    def config_for(cid: int) -> Config:
        with claim_lock:
            if cid not in server.client_ids or cid in claimed:
                raise ProtocolViolation(f"client id {cid} is unknown or already connected")
            claimed.add(cid)
        return make_config(cid)

    transports: list[TcpTransport] = []
    threads: list[threading.Thread] = []
    errors: list[BaseException] = []

    def run(t: TcpTransport) -> None:
        try:
            _serve_client(t, barrier, steps, config_for, timeout)
        except BaseException as exc:  # reported by serve()
            errors.append(exc)
            barrier.fail(exc)

    with socket.create_server(listen, reuse_port=False) as lsock:
        if bound is not None:
            bound.extend(lsock.getsockname()[:2])
        if ready is not None:
            ready.set()
        lsock.settimeout(timeout)
        try:
            while len(transports) < expected:
                try:
                    conn, peer = lsock.accept()
                except socket.timeout:
                    raise MissingClient(f"only {len(transports)} of {expected} clients connected") from None
                log.info("client connected from %s", peer)
                t = TcpTransport(conn, transcript)
                transports.append(t)
                th = threading.Thread(target=run, args=(t,), daemon=True)
                th.start()
                threads.append(th)
            for th in threads:
                th.join()
        finally:
            if errors or len(transports) < expected:
                for t in transports:
                    try:
                        t.send_message(Done())
                    except SplitMeshError:
                        pass
            for t in transports:
                t.close()
    if errors:
        first = next((e for e in errors if not isinstance(e, (MissingClient,))), errors[0])
        raise first
    return barrier.results


def run_client(client: ClientNode, transport: Transport, timeout: float | None = 60.0) -> list[Metrics]:
    """Client loop: handshake, then follow the schedule derived from the server's Config."""
    session = handshake(transport, client.client_id, timeout=timeout)
    client.configure(session.config)
    cfg = session.config
    steps = plan_steps(cfg.batch_size, cfg.shard_sizes, cfg.epochs)
    cid = client.client_id
    metrics: list[Metrics] = []
    epoch = None
    for step in steps:
        if step.epoch != epoch:
            epoch = step.epoch
            client.start_epoch()
        if cid not in step.active():
            continue
        if step.phase is Phase.TRAIN:
            act = client.client_round(client.take(step.rows[cid]), step.round_id)
        else:
            act = client.eval_activations(step.round_id)
        transport.send_message(act)
        reply = transport.recv_message(timeout)
        if isinstance(reply, Done):
            raise ProtocolViolation(f"server aborted the run at round {step.round_id}")
        if step.phase is Phase.TRAIN:
            if not isinstance(reply, Gradients):
                raise ProtocolViolation(f"expected Gradients, got {type(reply).__name__}")
            client.client_apply_gradients(reply)
        else:
            if not isinstance(reply, Metrics):
                raise ProtocolViolation(f"expected Metrics, got {type(reply).__name__}")
            metrics.append(reply)
    final = transport.recv_message(timeout)
    if not isinstance(final, Done):
        raise ProtocolViolation(f"expected Done, got {type(final).__name__}")
    transport.send_message(Done())
    return metrics
