"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints a single ``[PASS]``/``[FAIL]`` line; the lines are also
collected into an "acceptance criteria" section of the pytest summary.
"""

import time

import numpy as np
import pytest

from hypuml import ball, diff
from hypuml import uncertainty as unc
from hypuml.cli import main as cli_main
from hypuml.config import TrainConfig
from hypuml.data import FeatureSet, SynthSpec, feature_bytes, features_from_bytes, generate_synthetic
from hypuml.errors import BadMagic, ChecksumMismatch, VersionMismatch
from hypuml.evaluation import BallPoints, cmc, evaluate
from hypuml.head import Checkpoint, checkpoint_bytes, checkpoint_from_bytes, head_forward, init_head
from hypuml.losses import contrastive_loss, triplet_loss
from hypuml.optim import AdamState
from hypuml.trainer import train

from conftest import ball_points

CURVATURES = (0.05, 0.1, 0.3, 1.0)
DESK_LR = 1e-3
EPOCHS = 100
SEP = 0.1


def _trained_recall(spec, config):
    data = generate_synthetic(spec)
    res = train(data, config)
    emb = head_forward(data.features, res.checkpoint.params)
    return evaluate(BallPoints(emb, config.curvature), data.labels)


# 1 -----------------------------------------------------------------------------


def test_c01_geometry_identities(report_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = dict(identity=0.0, inverse=0.0, symmetry=0.0, triangle=0.0, roundtrip=0.0)
    for c in CURVATURES:
        x, y, z = (ball_points(rng, 1000, 8, c, hi=0.95) for _ in range(3))
        zero = np.zeros_like(x)
        worst["identity"] = max(worst["identity"],
                                np.abs(ball.mobius_add(zero, x, c) - x).max(),
                                np.abs(ball.mobius_add(x, zero, c) - x).max())
        worst["inverse"] = max(worst["inverse"], np.abs(ball.mobius_add(-x, ball.mobius_add(x, y, c), c) - y).max())
        dxy, dyx = ball.hyp_distance(x, y, c), ball.hyp_distance(y, x, c)
        worst["symmetry"] = max(worst["symmetry"], np.abs(dxy - dyx).max())
        viol = ball.hyp_distance(x, z, c) - dxy - ball.hyp_distance(y, z, c)
        worst["triangle"] = max(worst["triangle"], max(viol.max(), 0.0))
        # tangent vectors whose image is not clipped: sqrt(c) ||v|| <= 3
        v = rng.standard_normal((1000, 8))
        v *= rng.uniform(0, 3, (1000, 1)) / (np.sqrt(c) * np.linalg.norm(v, axis=1, keepdims=True))
        worst["roundtrip"] = max(worst["roundtrip"],
                                 np.abs(ball.log_map_0(ball.exp_map_0(v, c), c) - v).max(),
                                 np.abs(ball.exp_map_0(ball.log_map_0(x, c), c) - x).max())
    elapsed = time.perf_counter() - t0
    ok = (worst["identity"] <= 1e-9 and worst["inverse"] <= 1e-9 and worst["symmetry"] <= 1e-9
          and worst["triangle"] <= 1e-8 and worst["roundtrip"] <= 1e-6 and elapsed < 5.0)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.2f}s"
    assert report_criterion(1, "geometry identity suite", ok, detail)


# 2 -----------------------------------------------------------------------------


def test_c02_euclidean_limit(report_criterion):
    rng = np.random.default_rng(2)
    c = 1e-6
    x = ball_points(rng, 1000, 8, 1.0, hi=1.0)
    y = ball_points(rng, 1000, 8, 1.0, hi=1.0)
    ref = 2.0 * np.linalg.norm(x - y, axis=1)
    dev = np.max(np.abs(ball.hyp_distance(x, y, c) - ref) / ref)
    assert report_criterion(2, "Euclidean limit at c = 1e-6", dev <= 1e-3, f"max relative deviation {dev:.2e}")


# 3 -----------------------------------------------------------------------------


def test_c03_gradient_suite(report_criterion):
    t0 = time.perf_counter()
    reports = diff.gradcheck_all(seed=42, configs=10, curvatures=(0.05, 0.1, 0.3), threshold=1e-4)
    elapsed = time.perf_counter() - t0
    failed = [r.primitive for r in reports if not r.passed]
    worst = max(r.worst for r in reports)
    ok = not failed and elapsed < 30.0
    detail = f"{len(reports)} primitives, worst rel err {worst:.2e}, {elapsed:.1f}s" + (
        f", failed: {failed}" if failed else "")
    assert report_criterion(3, "gradcheck_all at 1e-4", ok, detail)


# 4 -----------------------------------------------------------------------------


def test_c04_uniform_uncertainty_equivalence(report_criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for c in CURVATURES:
        for scale in (0.02, 0.1, 1.0):
            d = rng.standard_normal((12, 6))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            emb = d * rng.uniform(0.05, 0.9) / np.sqrt(c)
            labels = np.repeat(np.arange(4), 3)
            a = contrastive_loss(emb, labels, c, mode="adaptive", scale=scale).loss
            f = contrastive_loss(emb, labels, c, mode="fixed", tau=np.log(2) / scale).loss
            worst = max(worst, abs(a - f))
    assert report_criterion(4, "uniform-radius adaptive == fixed at ln2/scale", worst <= 1e-10,
                            f"max |diff| {worst:.1e}")


# 5 -----------------------------------------------------------------------------


def test_c05_degenerate_closed_form(report_criterion):
    worst_c, worst_t, exact = 0.0, 0.0, True
    for c in CURVATURES:
        for P, K in ((3, 2), (5, 3), (10, 3)):
            B = P * K
            emb = np.tile(ball_points(np.random.default_rng(B), 1, 4, c, hi=0.5), (B, 1))
            labels = np.repeat(np.arange(P), K)
            for mode in ("adaptive", "fixed"):
                out = contrastive_loss(emb, labels, c, mode=mode)
                worst_c = max(worst_c, abs(out.loss - np.log(B - 1)), np.max(np.abs(out.terms - np.log(B - 1))))
            # the hinge is exactly alpha at d_p = d_n = 0: compare bit-for-bit with the
            # margin the loss used, and with the closed form ln(2) e^c to rounding
            out = triplet_loss(emb, labels, c, mode="adaptive")
            exact &= bool(np.all(out.terms == out.weights))
            worst_t = max(worst_t, abs(out.loss - np.log(2.0) * np.exp(c)))
            exact &= bool(np.all(triplet_loss(emb, labels, c, mode="fixed", margin=0.3).terms == 0.3))
    ok = worst_c <= 1e-9 and exact and worst_t <= 1e-15
    assert report_criterion(5, "identical embeddings: ln(B-1) and alpha", ok,
                            f"contrastive err {worst_c:.1e}, triplet exact {exact}, "
                            f"|triplet - ln2 e^c| {worst_t:.1e}")


# 6 -----------------------------------------------------------------------------


@pytest.mark.parametrize("loss", ["contrastive", "triplet"])
def test_c06_end_to_end_synthetic(loss, report_criterion):
    spec = SynthSpec(num_classes=10, per_class=50, dim=64, separation=SEP, sigma=SEP / 8, seed=0)
    cfg = TrainConfig(loss=loss, mode="adaptive", curvature=0.1, scale=0.02, lr=DESK_LR, epochs=EPOCHS,
                      samples_per_class=2 if loss == "triplet" else None, seed=0)
    t0 = time.perf_counter()
    rep = _trained_recall(spec, cfg)
    elapsed = time.perf_counter() - t0
    r1, r8 = rep.recall_at(1), rep.recall_at(8)
    ok = r1 >= 0.95 and r8 >= 0.99 and elapsed < 60.0
    assert report_criterion(6, f"end-to-end synthetic retrieval ({loss}, adaptive)", ok,
                            f"recall@1 {r1:.3f}, recall@8 {r8:.3f}, {elapsed:.1f}s")


# 7 -----------------------------------------------------------------------------


@pytest.mark.parametrize("loss", ["contrastive", "triplet"])
def test_c07_adaptive_not_worse_than_fixed(loss, report_criterion):
    adaptive, fixed = [], []
    for seed in range(5):
        spec = SynthSpec(num_classes=10, per_class=50, dim=64, separation=SEP, sigma=SEP / 2, seed=seed)
        for mode, out in (("adaptive", adaptive), ("fixed", fixed)):
            cfg = TrainConfig(loss=loss, mode=mode, curvature=0.1, scale=0.02, tau=0.2, margin=0.3,
                              lr=DESK_LR, epochs=EPOCHS, seed=seed)
            out.append(_trained_recall(spec, cfg).recall_at(1))
    a, f = np.array(adaptive), np.array(fixed)
    ok = bool(np.all(a >= f - 0.02))
    detail = (f"adaptive {np.round(a, 3).tolist()} vs fixed {np.round(f, 3).tolist()}, "
              f"worst gap {np.min(a - f):+.3f}")
    assert report_criterion(7, f"noisy ablation non-regression ({loss})", ok, detail)


# 8 -----------------------------------------------------------------------------


def test_c08_cmc_properties(report_criterion):
    P, K, trials = 10, 5, 50
    N = P * K
    rng = np.random.default_rng(8)
    labels = np.repeat(np.arange(P), K)
    ks = tuple(range(1, N))
    r1, monotone = [], True
    for _ in range(trials):
        rep = evaluate(BallPoints(ball_points(rng, N, 16, 0.1), 0.1), labels, ks=ks)
        monotone &= all(x <= y for x, y in zip(rep.recall, rep.recall[1:]))
        r1.append(rep.recall_at(1))
    p = (K - 1) / (N - 1)
    sd = np.sqrt(p * (1 - p) / N / trials)
    z = (np.mean(r1) - p) / sd
    ok = monotone and abs(z) <= 3.0
    assert report_criterion(8, "CMC monotone and chance-level recall@1", ok,
                            f"mean recall@1 {np.mean(r1):.4f} vs {p:.4f} (z = {z:+.2f}), monotone {monotone}")


# 9 -----------------------------------------------------------------------------


def test_c09_train_determinism(tmp_path, report_criterion):
    feats = tmp_path / "f.hypf"
    assert cli_main(["synth", "-o", str(feats), "--seed", "3"]) == 0
    outputs = []
    for run in ("a", "b"):
        ck, log = tmp_path / f"{run}.ckpt", tmp_path / f"{run}.jsonl"
        assert cli_main(["train", str(feats), "-o", str(ck), "--metrics", str(log), "--lr", "1e-3",
                         "--epochs", "10", "--seed", "5"]) == 0
        outputs.append((ck.read_bytes(), log.read_bytes()))
    ok = outputs[0] == outputs[1]
    assert report_criterion(9, "train twice gives byte-identical outputs", ok,
                            f"checkpoint {len(outputs[0][0])} bytes, metrics {len(outputs[0][1])} bytes")


# 10 ----------------------------------------------------------------------------


def _corruptions(raw):
    flipped = bytearray(raw)
    flipped[len(raw) // 2] ^= 0x40
    version = bytearray(raw)
    version[4] ^= 0x07
    return [
        (b"XXXX" + raw[4:], BadMagic),
        (b"", BadMagic),
        (bytes(version), VersionMismatch),
        (bytes(flipped), ChecksumMismatch),
        (raw[:-5], ChecksumMismatch),
    ]


def test_c10_persistence(report_criterion):
    rng = np.random.default_rng(10)
    data = FeatureSet(rng.standard_normal((64, 32)).astype(np.float32), rng.integers(0, 8, 64))
    raw_f = feature_bytes(data)
    back = features_from_bytes(raw_f)
    feat_ok = back.features.tobytes() == data.features.tobytes() and feature_bytes(back) == raw_f

    params = init_head(32, 16, c=0.3, seed=2)
    adam = AdamState(m=[rng.standard_normal(a.shape) for a in params.arrays()],
                     v=[rng.random(a.shape) for a in params.arrays()], step=9)
    ck = Checkpoint(params, adam, step=9, config=TrainConfig(curvature=0.3).to_dict())
    raw_c = checkpoint_bytes(ck)
    ck_ok = checkpoint_bytes(checkpoint_from_bytes(raw_c)) == raw_c

    rejected, total = 0, 0
    for reader, raw in ((features_from_bytes, raw_f), (checkpoint_from_bytes, raw_c)):
        for bad, err in _corruptions(raw):
            total += 1
            try:
                reader(bad)
            except err:
                rejected += 1
            except Exception:
                pass
    ok = feat_ok and ck_ok and rejected == total
    assert report_criterion(10, "bit-exact round trips, corrupted files rejected", ok,
                            f"HYPF {feat_ok}, checkpoint {ck_ok}, corruptions rejected {rejected}/{total}")
