"""Exported ball embeddings with their uncertainties.

HYPE layout (little-endian)::

    magic     4s   b"HYPE"
    version   u32
    curvature f64
    count     u64
    dim       u32
    count x (dim x f64 coordinates, f64 clamped uncertainty, u32 label)
    crc32     u32  over everything before it
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ball
from .data import FeatureSet
from .errors import BadMagic, ChecksumMismatch, IoError, VersionMismatch
from .head import HeadParams, head_forward
from .uncertainty import clamped_uncertainty

EMBED_MAGIC = b"HYPE"
EMBED_VERSION = 1
_HEADER = struct.Struct("<4sIdQI")


@dataclass
class Embeddings:
    coords: np.ndarray  # (N, n) float64, inside the ball
    uncertainty: np.ndarray  # (N,) float64 in (0, 1]
    labels: np.ndarray  # (N,) int64
    c: float

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def embed(data: FeatureSet, params: HeadParams) -> Embeddings:
    if len(data) == 0:
        empty = np.zeros((0, params.d_out))
        return Embeddings(empty, np.zeros(0), data.labels.copy(), params.c)
    coords = head_forward(data.as_float64(), params)
    return Embeddings(coords, clamped_uncertainty(coords, params.c), data.labels.copy(), params.c)


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("x", "<f8", (dim,)), ("u", "<f8"), ("y", "<u4")])


def embeddings_bytes(emb: Embeddings) -> bytes:
    n, d = emb.coords.shape
    rows = np.empty(n, dtype=_record_dtype(d))
    rows["x"] = emb.coords
    rows["u"] = emb.uncertainty
    rows["y"] = emb.labels
    body = _HEADER.pack(EMBED_MAGIC, EMBED_VERSION, float(emb.c), n, d) + rows.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def embeddings_from_bytes(raw: bytes) -> Embeddings:
    if len(raw) < 8 or raw[:4] != EMBED_MAGIC:
        raise BadMagic("not a HYPE embeddings file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != EMBED_VERSION:
        raise VersionMismatch(f"HYPE version {version} is not supported (expected {EMBED_VERSION})")
    if len(raw) < _HEADER.size + 4:
        raise ChecksumMismatch("HYPE file truncated inside the header")
    _, _, c, n, d = _HEADER.unpack_from(raw, 0)
    rec = _record_dtype(d)
    expected = _HEADER.size + n * rec.itemsize + 4
    if len(raw) != expected:
        raise ChecksumMismatch(f"HYPE payload is {len(raw)} bytes, header implies {expected}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("HYPE CRC32 mismatch")
    rows = np.frombuffer(body, dtype=rec, count=n, offset=_HEADER.size)
    coords = rows["x"].astype(np.float64).reshape(n, d)
    ball.check_in_ball(coords, c)
    return Embeddings(coords, rows["u"].astype(np.float64), rows["y"].astype(np.int64), c)


def write_embeddings(path, emb: Embeddings) -> None:
    try:
        Path(path).write_bytes(embeddings_bytes(emb))
    except OSError as exc:
        raise IoError(f"cannot write embeddings {path}: {exc}") from exc


def read_embeddings(path) -> Embeddings:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read embeddings {path}: {exc}") from exc
    return embeddings_from_bytes(raw)
