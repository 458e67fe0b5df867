import struct
import zlib

import numpy as np
import pytest

from hypuml import ball
from hypuml.config import TrainConfig
from hypuml.errors import BadMagic, ChecksumMismatch, DimensionMismatch, IoError, VersionMismatch
from hypuml.head import (
    Checkpoint,
    HeadParams,
    checkpoint_bytes,
    checkpoint_from_bytes,
    head_backward,
    head_forward,
    init_head,
    load_checkpoint,
    save_checkpoint,
)
from hypuml.optim import AdamState


def make_checkpoint(seed=3):
    p = init_head(6, 4, c=0.3, seed=seed)
    r = np.random.default_rng(seed)
    adam = AdamState(m=[r.standard_normal(a.shape) for a in p.arrays()],
                     v=[r.random(a.shape) for a in p.arrays()], step=17)
    p = HeadParams(W=p.W, b=r.standard_normal(4), c=p.c)
    return Checkpoint(params=p, adam=adam, step=42, config=TrainConfig(curvature=0.3, dim_out=4).to_dict())


def test_init_deterministic_and_bounded():
    a = init_head(64, 128, seed=5)
    b = init_head(64, 128, seed=5)
    np.testing.assert_array_equal(a.W, b.W)
    assert a.W.shape == (128, 64) and a.b.shape == (128,)
    assert np.all(np.abs(a.W) <= 1 / 8)
    np.testing.assert_array_equal(a.b, 0.0)
    assert not np.array_equal(a.W, init_head(64, 128, seed=6).W)


def test_forward_composition(rng):
    p = init_head(5, 3, c=0.1, seed=1)
    x = rng.standard_normal((7, 5))
    expected = ball.exp_map_0(ball.project_to_ball(x @ p.W.T + p.b, 0.1), 0.1)
    np.testing.assert_array_equal(head_forward(x, p), expected)


def test_forward_distance_to_origin_is_twice_preactivation_norm(rng):
    p = init_head(5, 3, c=0.1, seed=1)
    x = rng.standard_normal((7, 5)) * 0.2
    z = x @ p.W.T
    np.testing.assert_allclose(
        ball.dist_to_origin(head_forward(x, p), 0.1), 2 * np.linalg.norm(z, axis=1), rtol=1e-10
    )


def test_forward_stays_in_ball(rng):
    p = init_head(5, 3, c=1.0, seed=1)
    out = head_forward(rng.standard_normal((50, 5)) * 1e4, p)
    ball.check_in_ball(out, 1.0)


def test_dimension_mismatch():
    p = init_head(5, 3)
    with pytest.raises(DimensionMismatch):
        head_forward(np.zeros((2, 4)), p)
    with pytest.raises(DimensionMismatch):
        head_backward(np.zeros((2, 5)), p, np.zeros((2, 4)))


def test_backward_linear_region(rng):
    # unclipped: the chain is exp_map_0 after an affine map
    p = init_head(4, 3, c=0.1, seed=2)
    x = rng.standard_normal((5, 4))
    g = rng.standard_normal((5, 3))
    gW, gb = head_backward(x, p, g)
    gz = ball.exp_map_0_vjp(x @ p.W.T + p.b, 0.1, g)
    np.testing.assert_allclose(gW, gz.T @ x)
    np.testing.assert_allclose(gb, gz.sum(axis=0))


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "h.ckpt"
    save_checkpoint(path, ck)
    back = load_checkpoint(path)
    for a, b in zip([ck.params.W, ck.params.b, *ck.adam.m, *ck.adam.v],
                    [back.params.W, back.params.b, *back.adam.m, *back.adam.v]):
        assert a.tobytes() == b.tobytes()
    assert back.step == 42 and back.adam.step == 17 and back.params.c == 0.3
    assert back.config == ck.config
    assert checkpoint_bytes(back) == path.read_bytes()


def test_checkpoint_bad_magic():
    raw = bytearray(checkpoint_bytes(make_checkpoint()))
    raw[:4] = b"NOPE"
    with pytest.raises(BadMagic):
        checkpoint_from_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        checkpoint_from_bytes(b"")


def test_checkpoint_version_mismatch_names_both_versions():
    raw = bytearray(checkpoint_bytes(make_checkpoint()))
    raw[4:8] = struct.pack("<I", 9)
    with pytest.raises(VersionMismatch, match=r"9.*1"):
        checkpoint_from_bytes(bytes(raw))


@pytest.mark.parametrize("where", [10, 100, -10])
def test_checkpoint_flipped_byte(where):
    raw = bytearray(checkpoint_bytes(make_checkpoint()))
    raw[where] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        checkpoint_from_bytes(bytes(raw))


@pytest.mark.parametrize("cut", [20, 200, 1])
def test_checkpoint_truncated(cut):
    raw = checkpoint_bytes(make_checkpoint())
    with pytest.raises(ChecksumMismatch):
        checkpoint_from_bytes(raw[:-cut])


def test_checkpoint_fingerprint_tamper_detected():
    raw = bytearray(checkpoint_bytes(make_checkpoint()))
    # overwrite one fingerprint byte and recompute the CRC so only the fingerprint is wrong
    raw[44] ^= 0xFF
    body = bytes(raw[:-4])
    raw[-4:] = struct.pack("<I", zlib.crc32(body))
    with pytest.raises(ChecksumMismatch, match="fingerprint"):
        checkpoint_from_bytes(bytes(raw))


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_checkpoint(tmp_path / "missing.ckpt")
