"""Session setup: the client says Hello, the server answers with its Config.

A server that cannot speak the client's version answers with its own Hello
instead and hangs up, so both sides fail with UnsupportedVersion before any
training data moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..errors import ProtocolViolation, UnsupportedVersion
from .messages import PROTOCOL_VERSION, Config, Done, Hello
from .transport import Transport

DEFAULT_TIMEOUT = 30.0


@dataclass
class Session:
    transport: Transport
    client_id: int
    config: Config


def handshake(transport: Transport, client_id: int, version: int = PROTOCOL_VERSION,
              timeout: float | None = DEFAULT_TIMEOUT) -> Session:
    """Client side."""
    transport.send_message(Hello(client_id, version))
    reply = transport.recv_message(timeout)
    if isinstance(reply, Hello):
        raise UnsupportedVersion(f"server speaks protocol {reply.protocol_version}, client {version}")
    if isinstance(reply, Done):
        raise ProtocolViolation(f"server refused client {client_id}")
    if not isinstance(reply, Config):
        raise ProtocolViolation(f"expected Config, got {type(reply).__name__}")
    return Session(transport, client_id, reply)


def accept_handshake(transport: Transport, make_config: Callable[[int], Config],
                     expected_version: int = PROTOCOL_VERSION,
                     timeout: float | None = DEFAULT_TIMEOUT) -> Session:
    """Server side. ``make_config`` may raise to refuse a client id."""
    try:
        hello = transport.recv_message(timeout)
    except UnsupportedVersion:
        transport.send_message(Hello(0, expected_version))
        raise
    if not isinstance(hello, Hello):
        raise ProtocolViolation(f"expected Hello, got {type(hello).__name__}")
    if hello.protocol_version != expected_version:
        transport.send_message(Hello(0, expected_version))
        raise UnsupportedVersion(f"client {hello.client_id} speaks protocol {hello.protocol_version}, "
                                 f"server {expected_version}")
    try:
        config = make_config(hello.client_id)
    except Exception:
        transport.send_message(Done())
        raise
    transport.send_message(config)
    return Session(transport, hello.client_id, config)
