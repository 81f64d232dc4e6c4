"""Frame codec.

Frame: b"MSSL" | u8 version | u8 msg_type | u32 LE payload_len | payload.
Payload primitives are little-endian; tensors are ``u8 rank, u32 dims..., f32
data`` and strings are ``u16 length, UTF-8 bytes``.

  Hello        u32 client_id, u8 protocol_version
  Config       32B plan_hash, u32 epochs, u32 batch_size, f64 lr, u64 seed,
               u8 loss, str client_segment, u32 shard_size,
               u16 count + u32 shard_sizes
  Activations  u32 round_id, u32 client_id, u8 phase, tensor, tensor labels
  Gradients    u32 round_id, u32 client_id, tensor
  Metrics      u32 epoch, f64 loss, f64 metric
  Done         (empty)
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import (
    BadMagic,
    MalformedPayload,
    PayloadOverflow,
    TruncatedFrame,
    UnknownType,
    UnsupportedVersion,
)
from ..nn.losses import LossKind
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

MAGIC = b"MSSL"
HEADER = struct.Struct("<4sBBI")
HEADER_SIZE = HEADER.size
DEFAULT_MAX_PAYLOAD = 256 * 1024 * 1024

_LOSS_CODES = {LossKind.BCE: 0, LossKind.MSE: 1}
_LOSS_FROM_CODE = {v: k for k, v in _LOSS_CODES.items()}


def _tensor(t: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(t, dtype="<f4")
    if not 1 <= arr.ndim <= 255:
        raise ValueError("wire tensors have rank 1..255")
    return struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape) + arr.tobytes()


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("wire strings are limited to 65535 bytes")
    return struct.pack("<H", len(raw)) + raw


def encode_payload(msg: Message) -> bytes:
    if isinstance(msg, Hello):
        return struct.pack("<IB", msg.client_id, msg.protocol_version)
    if isinstance(msg, Config):
        return (msg.plan_hash
                + struct.pack("<IIdQB", msg.epochs, msg.batch_size, msg.learning_rate, msg.seed,
                              _LOSS_CODES[msg.loss])
                + _string(msg.client_segment)
                + struct.pack(f"<IH{len(msg.shard_sizes)}I", msg.shard_size, len(msg.shard_sizes),
                              *msg.shard_sizes))
    if isinstance(msg, Activations):
        return (struct.pack("<IIB", msg.round_id, msg.client_id, int(msg.phase))
                + _tensor(msg.tensor) + _tensor(msg.labels))
    if isinstance(msg, Gradients):
        return struct.pack("<II", msg.round_id, msg.client_id) + _tensor(msg.tensor)
    if isinstance(msg, Metrics):
        return struct.pack("<Idd", msg.epoch, msg.loss, msg.metric)
    if isinstance(msg, Done):
        return b""
    raise TypeError(f"not a protocol message: {msg!r}")


def encode_message(msg: Message, version: int = PROTOCOL_VERSION) -> bytes:
    payload = encode_payload(msg)
    return HEADER.pack(MAGIC, version, int(msg.msg_type), len(payload)) + payload


class _Reader:
    def __init__(self, buf: memoryview):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n > len(self.buf) - self.pos:
            raise MalformedPayload(f"payload ends {n - (len(self.buf) - self.pos)} bytes early")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size))

    def tensor(self) -> np.ndarray:
        (rank,) = self.unpack("B")
        if rank == 0:
            raise MalformedPayload("tensor rank must be >= 1")
        dims = self.unpack(f"{rank}I")
        count = 1
        for d in dims:
            if d == 0:
                raise MalformedPayload("tensor dimensions must be >= 1")
            count *= d
            if count * 4 > len(self.buf) - self.pos:
                raise MalformedPayload(f"tensor of shape {list(dims)} exceeds the payload")
        data = self.take(count * 4)
        return np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(dims)

    def string(self) -> str:
        (n,) = self.unpack("H")
        try:
            return bytes(self.take(n)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayload(f"invalid UTF-8 string: {exc}") from None

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise MalformedPayload(f"{len(self.buf) - self.pos} trailing payload bytes")


def decode_payload(msg_type: int, payload: bytes | memoryview) -> Message:
    r = _Reader(memoryview(payload))
    if msg_type == MsgType.HELLO:
        cid, ver = r.unpack("IB")
        msg: Message = Hello(cid, ver)
    elif msg_type == MsgType.CONFIG:
        digest = bytes(r.take(32))
        epochs, batch, lr, seed, loss_code = r.unpack("IIdQB")
        if loss_code not in _LOSS_FROM_CODE:
            raise MalformedPayload(f"unknown loss code {loss_code}")
        segment = r.string()
        shard_size, count = r.unpack("IH")
        sizes = r.unpack(f"{count}I")
        msg = Config(digest, epochs, batch, lr, seed, _LOSS_FROM_CODE[loss_code], segment, shard_size, sizes)
    elif msg_type == MsgType.ACTIVATIONS:
        rid, cid, phase = r.unpack("IIB")
        if phase not in (Phase.TRAIN, Phase.EVAL):
            raise MalformedPayload(f"unknown phase {phase}")
        tensor = r.tensor()
        labels = r.tensor()
        if labels.shape[0] != tensor.shape[0]:
            raise MalformedPayload(f"{labels.shape[0]} labels for {tensor.shape[0]} activation rows")
        msg = Activations(rid, cid, tensor, labels, Phase(phase))
    elif msg_type == MsgType.GRADIENTS:
        rid, cid = r.unpack("II")
        msg = Gradients(rid, cid, r.tensor())
    elif msg_type == MsgType.METRICS:
        epoch, loss, metric = r.unpack("Idd")
        msg = Metrics(epoch, loss, metric)
    elif msg_type == MsgType.DONE:
        msg = Done()
    else:
        raise UnknownType(f"unknown message type {msg_type}")
    r.done()
    return msg


def parse_header(header: bytes, max_payload: int = DEFAULT_MAX_PAYLOAD) -> tuple[int, int, int]:
    """Validate a frame header; returns (version, msg_type, payload_len)."""
    if header[:len(MAGIC)] != MAGIC[:len(header)]:
        raise BadMagic(f"bad frame magic {bytes(header[:4])!r}")
    if len(header) < HEADER_SIZE:
        raise TruncatedFrame(f"frame header needs {HEADER_SIZE} bytes, got {len(header)}")
    _, version, msg_type, length = HEADER.unpack(header[:HEADER_SIZE])
    if version != PROTOCOL_VERSION:
        raise UnsupportedVersion(f"frame version {version}, this peer speaks {PROTOCOL_VERSION}")
    if msg_type not in MsgType._value2member_map_:
        raise UnknownType(f"unknown message type {msg_type}")
    if length > max_payload:
        raise PayloadOverflow(f"declared payload of {length} bytes exceeds the {max_payload}-byte cap")
    return version, msg_type, length


def decode_message(data: bytes, max_payload: int = DEFAULT_MAX_PAYLOAD) -> Message:
    """Decode exactly one frame. Every failure is a :class:`DecodeError` subclass."""
    data = bytes(data)
    _, msg_type, length = parse_header(data[:HEADER_SIZE], max_payload)
    end = HEADER_SIZE + length
    if len(data) < end:
        raise TruncatedFrame(f"frame declares {length} payload bytes, only {len(data) - HEADER_SIZE} present")
    if len(data) > end:
        raise MalformedPayload(f"{len(data) - end} bytes after the frame")
    return decode_payload(msg_type, memoryview(data)[HEADER_SIZE:end])
