"""``.nt`` tensor files: b"NTSR", u8 version, u8 rank, u32 LE dims, f32 LE row-major data."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import IoError

NT_MAGIC = b"NTSR"
NT_VERSION = 1


def encode_nt(tensor: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError("nt files hold tensors of rank 1..255")
    head = NT_MAGIC + struct.pack("<BB", NT_VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def decode_nt(data: bytes) -> np.ndarray:
    if len(data) < 6 or data[:4] != NT_MAGIC:
        raise IoError("not an .nt tensor file (bad magic)")
    version, rank = data[4], data[5]
    if version != NT_VERSION:
        raise IoError(f"unsupported .nt version {version}")
    end = 6 + 4 * rank
    if rank < 1 or len(data) < end:
        raise IoError("truncated .nt header")
    dims = struct.unpack(f"<{rank}I", data[6:end])
    count = 1
    for d in dims:
        count *= d
    if len(data) != end + 4 * count:
        raise IoError(f".nt payload holds {len(data) - end} bytes, shape {list(dims)} needs {4 * count}")
    return np.frombuffer(data, dtype="<f4", offset=end).reshape(dims).astype(np.float32)


def write_nt(path, tensor: np.ndarray) -> None:
    Path(path).write_bytes(encode_nt(tensor))


def read_nt(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode_nt(data)


def pgm_to_nt(src, dst, size: tuple[int, int] | None = None) -> np.ndarray:
    """Convert an 8-bit grayscale PGM (P5) to a [1, H, W] ``.nt`` file scaled to [0, 1].

    ``size`` is (height, width); resizing is bilinear.
    """
    from PIL import Image

    try:
        with Image.open(src) as img:
            if img.format != "PPM" or img.mode != "L":
                raise IoError(f"{src} is not an 8-bit grayscale PGM")
            if size is not None:
                img = img.resize((size[1], size[0]), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except IoError:
        raise
    except OSError as exc:
        raise IoError(f"cannot read {src}: {exc}") from exc
    tensor = arr[None, :, :]
    write_nt(dst, tensor)
    return tensor
