"""Binary wire protocol between split-learning clients and the server."""

from .codec import DEFAULT_MAX_PAYLOAD, MAGIC, decode_message, encode_message
from .handshake import Session, accept_handshake, handshake
from .messages import (
    PROTOCOL_VERSION,
    Activations,
    Config,
    Done,
    Gradients,
    Hello,
    Message,
    Metrics,
    MsgType,
    Phase,
)
from .transport import DEFAULT_PORT, QueueTransport, TcpTransport, Transcript, Transport, parse_addr

__all__ = [
    "DEFAULT_MAX_PAYLOAD", "DEFAULT_PORT", "MAGIC", "PROTOCOL_VERSION", "Activations", "Config",
    "Done", "Gradients", "Hello", "Message", "Metrics", "MsgType", "Phase", "QueueTransport",
    "Session", "TcpTransport", "Transcript", "Transport", "accept_handshake", "decode_message",
    "encode_message", "handshake", "parse_addr",
]
