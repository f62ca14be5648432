"""Binary tensor container ("LARW" format).

Layout, all integers little-endian:

    magic   4 bytes  b"LARW"
    version u32      currently 1
    count   u32      number of tensors
    entry*  count times:
        name_len u32, name UTF-8 bytes
        dtype    u8   0 = float32, 1 = float64
        rank     u8
        dims     u32 * rank
    payload          raw little-endian scalars, manifest order

The payload length must equal the sum over entries of prod(dims) * itemsize;
tensor names must be unique.  save -> load -> save reproduces identical
bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateTensorError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    VersionMismatchError,
)

MAGIC = b"LARW"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    names = list(tensors)
    if len(set(names)) != len(names):
        raise DuplicateTensorError("tensor names must be unique")
    header = bytearray()
    header += MAGIC
    header += struct.pack("<I", VERSION)
    header += struct.pack("<I", len(names))
    payload = bytearray()
    for name in names:
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in _CODE_FOR:
            raise UnsupportedDtypeError(
                f"tensor {name!r} has unsupported dtype {arr.dtype}"
            )
        encoded = name.encode("utf-8")
        header += struct.pack("<I", len(encoded))
        header += encoded
        header += struct.pack("<BB", _CODE_FOR[arr.dtype], arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.astype(arr.dtype.newbyteorder("<")).tobytes(order="C")
    Path(path).write_bytes(bytes(header) + bytes(payload))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedPayloadError(
                f"file truncated reading {what}: need {self.pos + n} bytes, have {len(self.buf)}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]


def read_tensors(path: str | Path) -> dict[str, np.ndarray]:
    r = _Reader(Path(path).read_bytes())
    if r.take(4, "magic") != MAGIC:
        raise BadMagicError(f"{path}: not a LARW file")
    version = r.u32("version")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")
    count = r.u32("tensor count")
    entries = []
    seen = set()
    for _ in range(count):
        name_len = r.u32("name length")
        name = r.take(name_len, "name").decode("utf-8")
        if name in seen:
            raise DuplicateTensorError(f"{path}: duplicate tensor name {name!r}")
        seen.add(name)
        code = r.u8("dtype code")
        if code not in _DTYPE_CODES:
            raise UnsupportedDtypeError(f"{path}: unsupported dtype code {code}")
        rank = r.u8("rank")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims"))
        entries.append((name, _DTYPE_CODES[code], dims))

    expected = sum(int(np.prod(d, dtype=np.int64)) * dt.itemsize for _, dt, d in entries)
    actual = len(r.buf) - r.pos
    if actual != expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {actual} bytes, manifest requires {expected}"
        )
    out: dict[str, np.ndarray] = {}
    for name, dt, dims in entries:
        n = int(np.prod(dims, dtype=np.int64))
        raw = r.take(n * dt.itemsize, f"tensor {name!r}")
        out[name] = np.frombuffer(raw, dtype=dt).reshape(dims).copy()
    return out
