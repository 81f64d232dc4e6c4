"""Byte transports carrying whole frames: an in-process queue pair and TCP.

Both honour the same contract: ``send`` takes one encoded frame, ``recv``
returns one complete frame or raises Timeout / ConnectionClosed / a
DecodeError for a hostile header.
"""

from __future__ import annotations

import queue
import socket
import threading
from typing import Optional

from ..errors import ConnectionClosed, Timeout
from .codec import DEFAULT_MAX_PAYLOAD, HEADER_SIZE, decode_message, encode_message, parse_header
from .messages import Message

DEFAULT_PORT = 7310
_CLOSED = object()


class Transcript:
    """Thread-safe log of every frame sent over the transports sharing it."""

    def __init__(self):
        self.frames: list[bytes] = []
        self._lock = threading.Lock()

    def record(self, frame: bytes) -> None:
        with self._lock:
            self.frames.append(bytes(frame))

    def joined(self) -> bytes:
        with self._lock:
            return b"".join(self.frames)


class Transport:
    transcript: Optional[Transcript] = None

    def send(self, frame: bytes) -> None:
        raise NotImplementedError

    def recv(self, timeout: float | None = None) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def send_message(self, msg: Message) -> None:
        frame = encode_message(msg)
        if self.transcript is not None:
            self.transcript.record(frame)
        self.send(frame)

    def recv_message(self, timeout: float | None = None) -> Message:
        return decode_message(self.recv(timeout))


class QueueTransport(Transport):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, transcript: Transcript | None = None):
        self.inbox = inbox
        self.outbox = outbox
        self.transcript = transcript

    @classmethod
    def pair(cls, transcript: Transcript | None = None) -> tuple["QueueTransport", "QueueTransport"]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, transcript), cls(b, a, transcript)

    def send(self, frame: bytes) -> None:
        self.outbox.put(bytes(frame))

    def recv(self, timeout: float | None = None) -> bytes:
        try:
            item = self.inbox.get(timeout=timeout)
        except queue.Empty:
            raise Timeout(f"no frame within {timeout}s") from None
        if item is _CLOSED:
            self.inbox.put(_CLOSED)
            raise ConnectionClosed("peer closed the in-process channel")
        return item

    def close(self) -> None:
        self.outbox.put(_CLOSED)


class TcpTransport(Transport):
    def __init__(self, sock: socket.socket, transcript: Transcript | None = None,
                 max_payload: int = DEFAULT_MAX_PAYLOAD):
        self.sock = sock
        self.transcript = transcript
        self.max_payload = max_payload
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    @classmethod
    def connect(cls, host: str, port: int = DEFAULT_PORT, timeout: float = 10.0, **kw) -> "TcpTransport":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(None)
        return cls(sock, **kw)

    def send(self, frame: bytes) -> None:
        try:
            self.sock.sendall(frame)
        except OSError as exc:
            raise ConnectionClosed(f"send failed: {exc}") from exc

    def _read_exact(self, n: int) -> bytes:
        chunks, got = [], 0
        while got < n:
            try:
                chunk = self.sock.recv(min(n - got, 1 << 20))
            except socket.timeout:
                raise Timeout("timed out waiting for frame bytes") from None
            except OSError as exc:
                raise ConnectionClosed(f"recv failed: {exc}") from exc
            if not chunk:
                raise ConnectionClosed("peer closed the connection")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def recv(self, timeout: float | None = None) -> bytes:
        self.sock.settimeout(timeout)
        try:
            header = self._read_exact(HEADER_SIZE)
            _, _, length = parse_header(header, self.max_payload)
            return header + self._read_exact(length)
        finally:
            if self.sock.fileno() != -1:
                self.sock.settimeout(None)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def parse_addr(addr: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    """``host:port``, ``:port``, ``port`` or ``host``."""
    if ":" in addr:
        host, port = addr.rsplit(":", 1)
        return host or default_host, int(port)
    if addr.isdigit():
        return default_host, int(addr)
    return addr or default_host, DEFAULT_PORT
