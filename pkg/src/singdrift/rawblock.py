"""Raw binary block: a small header followed by little-endian float64 data in row-major order.

Layout::

    8 bytes   magic b"SDBLK001"
    u32       length of kind string, then the utf-8 kind
    u32       ndim, then ndim x u64 shape
    ndim_geo x f64 origin, ndim_geo x f64 spacing   (u32 ndim_geo first)
    u32       number of metadata pairs, each as (u32 len, utf-8 key, u32 len, utf-8 json value)
    prod(shape) x f64 data
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SDBLK001"


@dataclass
class RawBlock:
    kind: str
    data: np.ndarray
    origin: tuple[float, ...] = ()
    spacing: tuple[float, ...] = ()
    metadata: dict = field(default_factory=dict)


def _put_str(buf: list, s: str) -> None:
    b = s.encode("utf-8")
    buf.append(struct.pack("<I", len(b)))
    buf.append(b)


def encode(block: RawBlock) -> bytes:
    data = np.ascontiguousarray(block.data, dtype="<f8")
    if len(block.origin) != len(block.spacing):
        raise ValueError("origin and spacing must have equal length")
    buf: list[bytes] = [MAGIC]
    _put_str(buf, block.kind)
    buf.append(struct.pack("<I", data.ndim))
    buf.append(struct.pack(f"<{data.ndim}Q", *data.shape))
    ng = len(block.origin)
    buf.append(struct.pack("<I", ng))
    buf.append(struct.pack(f"<{2 * ng}d", *block.origin, *block.spacing))
    buf.append(struct.pack("<I", len(block.metadata)))
    for k in sorted(block.metadata):
        _put_str(buf, k)
        _put_str(buf, json.dumps(block.metadata[k], sort_keys=True))
    buf.append(data.tobytes(order="C"))
    return b"".join(buf)


def decode(raw: bytes) -> RawBlock:
    if raw[:8] != MAGIC:
        raise ValueError("not a raw block (bad magic)")
    pos = 8

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, raw, pos)
        pos += struct.calcsize(fmt)
        return vals

    def take_str():
        nonlocal pos
        (n,) = take("<I")
        s = raw[pos : pos + n].decode("utf-8")
        pos += n
        return s

    kind = take_str()
    (ndim,) = take("<I")
    shape = take(f"<{ndim}Q")
    (ng,) = take("<I")
    geo = take(f"<{2 * ng}d")
    (nmeta,) = take("<I")
    meta = {}
    for _ in range(nmeta):
        k = take_str()
        meta[k] = json.loads(take_str())
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
    return RawBlock(kind, data, tuple(geo[:ng]), tuple(geo[ng:]), meta)


def write_block(path: str | Path, block: RawBlock) -> Path:
    path = Path(path)
    path.write_bytes(encode(block))
    return path


def read_block(path: str | Path) -> RawBlock:
    return decode(Path(path).read_bytes())
