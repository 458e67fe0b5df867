"""Trainable hyperbolic projection head and its checkpoint file.

The head is ``exp_map_0(project_to_ball(W x + b))``: a linear layer, a norm
clip of the tangent vector, and the origin exponential map.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ball
from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimensionMismatch,
    IoError,
    NonFiniteInput,
    VersionMismatch,
)
from .optim import AdamState

CHECKPOINT_MAGIC = b"HYPU"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIdIIQQ32sI")


@dataclass
class HeadParams:
    W: np.ndarray  # (d_out, d_in)
    b: np.ndarray  # (d_out,)
    c: float

    @property
    def d_in(self) -> int:
        return self.W.shape[1]

    @property
    def d_out(self) -> int:
        return self.W.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def replace_arrays(self, arrays) -> "HeadParams":
        W, b = arrays
        return HeadParams(W=W, b=b, c=self.c)


def init_head(d_in: int, d_out: int = 128, c: float = 0.1, seed: int = 0) -> HeadParams:
    """Uniform fan-in init ``W ~ U(-1/sqrt(d_in), 1/sqrt(d_in))``, zero bias."""
    if d_in < 1 or d_out < 1:
        raise ValueError("head dimensions must be positive")
    ball.check_curvature(c)
    rng = np.random.Generator(np.random.Philox(seed))
    bound = 1.0 / np.sqrt(d_in)
    W = rng.uniform(-bound, bound, size=(d_out, d_in))
    return HeadParams(W=W, b=np.zeros(d_out), c=float(c))


def _check_features(features, params: HeadParams) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise DimensionMismatch(
            f"features of shape {x.shape} do not match head input dimension {params.d_in}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("features contain NaN or infinite entries")
    return x


def head_forward(features, params: HeadParams) -> np.ndarray:
    x = _check_features(features, params)
    z = x @ params.W.T + params.b
    v = ball.project_to_ball(z, params.c)
    return ball.exp_map_0(v, params.c)


def head_backward(features, params: HeadParams, grad_embeddings) -> tuple[np.ndarray, np.ndarray]:
    x = _check_features(features, params)
    g = np.asarray(grad_embeddings, dtype=np.float64)
    if g.shape != (x.shape[0], params.d_out):
        raise DimensionMismatch(f"gradient shape {g.shape} != {(x.shape[0], params.d_out)}")
    z = x @ params.W.T + params.b
    v = ball.project_to_ball(z, params.c)
    g_v = ball.exp_map_0_vjp(v, params.c, g)
    g_z = ball.project_to_ball_vjp(z, params.c, g_v)
    return g_z.T @ x, g_z.sum(axis=0)


# -- checkpoints ----------------------------------------------------------------


@dataclass
class Checkpoint:
    params: HeadParams
    adam: AdamState
    step: int = 0
    config: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> bytes:
        return hashlib.sha256(_config_bytes(self.config)).digest()


def _config_bytes(config: dict) -> bytes:
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode()


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    p = ckpt.params
    cfg = _config_bytes(ckpt.config)
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        p.c,
        p.d_out,
        p.d_in,
        ckpt.step,
        ckpt.adam.step,
        ckpt.fingerprint,
        len(cfg),
    )
    blobs = [p.W, p.b, *ckpt.adam.m, *ckpt.adam.v]
    body = header + cfg + b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in blobs)
    return body + struct.pack("<I", zlib.crc32(body))


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise BadMagic("not a checkpoint file (missing HYPU magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint format version {version} is not supported (this build reads version {CHECKPOINT_VERSION})"
        )
    if len(data) < _HEADER.size + 4:
        raise ChecksumMismatch("checkpoint truncated inside the header")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("checkpoint CRC32 mismatch (file truncated or corrupted)")
    _, _, c, d_out, d_in, step, adam_step, fingerprint, cfg_len = _HEADER.unpack_from(body, 0)
    offset = _HEADER.size
    cfg_raw = body[offset : offset + cfg_len]
    offset += cfg_len
    shapes = [(d_out, d_in), (d_out,)] * 3
    expected = offset + 8 * sum(int(np.prod(s)) for s in shapes)
    if expected != len(body):
        raise ChecksumMismatch(f"checkpoint payload is {len(body)} bytes, header implies {expected}")
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(body, dtype="<f8", count=n, offset=offset).astype(np.float64).reshape(shape))
        offset += 8 * n
    config = json.loads(cfg_raw.decode())
    ckpt = Checkpoint(
        params=HeadParams(W=arrays[0], b=arrays[1], c=c),
        adam=AdamState(m=arrays[2:4], v=arrays[4:6], step=adam_step),
        step=step,
        config=config,
    )
    if ckpt.fingerprint != fingerprint:
        raise ChecksumMismatch("stored config fingerprint does not match the stored config")
    return ckpt


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    try:
        Path(path).write_bytes(checkpoint_bytes(ckpt))
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    return checkpoint_from_bytes(data)
