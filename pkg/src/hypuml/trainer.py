"""Deterministic P x K training loop over precomputed features."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .data import FeatureSet
from .errors import InsufficientClasses, InsufficientSamples, IoError, TrainingDiverged
from .head import Checkpoint, init_head
from .losses import loss_step
from .optim import AdamState, adam_step


def sampling_rng(seed: int) -> np.random.Generator:
    """Philox stream for batch sampling; independent of the head-init stream."""
    (child,) = np.random.SeedSequence(seed).spawn(1)
    return np.random.Generator(np.random.Philox(child))


class ClassIndex:
    """Record indices grouped by label, in ascending label order."""

    def __init__(self, labels):
        labels = np.asarray(labels)
        order = np.argsort(labels, kind="stable")
        uniq, starts = np.unique(labels[order], return_index=True)
        self.classes = uniq
        self.members = np.split(order, starts[1:]) if len(uniq) else []

    def __len__(self) -> int:
        return len(self.classes)


def check_layout(index: ClassIndex, P: int, K: int) -> None:
    if len(index) < P:
        raise InsufficientClasses(f"need {P} classes per batch, dataset has {len(index)}")
    short = [int(c) for c, m in zip(index.classes, index.members) if len(m) < K]
    if short:
        raise InsufficientSamples(f"classes {short[:10]} have fewer than K={K} samples")


def sample_batch(index: ClassIndex, P: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of P distinct classes x K distinct samples each, grouped by class."""
    check_layout(index, P, K)
    chosen = rng.choice(len(index), size=P, replace=False)
    return np.concatenate([rng.choice(index.members[i], size=K, replace=False) for i in chosen])


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    metrics: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)


def train(data: FeatureSet, config: TrainConfig, metrics_path=None) -> TrainResult:
    index = ClassIndex(data.labels)
    config = config.resolve(len(index))
    P, K, B = config.classes_per_batch, config.k, config.batch_size
    rng = sampling_rng(config.seed)
    params = init_head(data.dim, config.dim_out, config.curvature, seed=config.seed)
    adam = AdamState.zeros_like(params.arrays())
    features = data.as_float64()
    steps_per_epoch = len(data) // B if config.epochs else 0
    if config.epochs and steps_per_epoch == 0:
        raise InsufficientSamples(f"dataset of {len(data)} records is smaller than one batch of {B}")
    if config.epochs:
        check_layout(index, P, K)

    metrics, epoch_losses = [], []
    window = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        epoch_total = 0.0
        for _ in range(steps_per_epoch):
            idx = sample_batch(index, P, K, rng)
            out = loss_step(features[idx], data.labels[idx], params, config)
            loss = out.loss.loss
            if not math.isfinite(loss) or not (
                np.all(np.isfinite(out.grad_W)) and np.all(np.isfinite(out.grad_b))
            ):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at step {step + 1} (epoch {epoch}): loss={loss!r}, "
                    f"max|W|={float(np.max(np.abs(params.W))):.3g}"
                )
            new_arrays, adam = adam_step(
                params.arrays(), [out.grad_W, out.grad_b], adam, config.lr, config.weight_decay
            )
            params = params.replace_arrays(new_arrays)
            step += 1
            epoch_total += loss
            window.append((loss, float(np.mean(out.loss.weights)), float(np.mean(out.loss.uncertainty))))
            if step % config.log_interval == 0:
                arr = np.array(window)
                metrics.append(
                    {
                        "step": step,
                        "epoch": epoch,
                        "loss": float(arr[:, 0].mean()),
                        "mean_tau_or_alpha": float(arr[:, 1].mean()),
                        "mean_uncertainty": float(arr[:, 2].mean()),
                    }
                )
                window = []
        epoch_losses.append(epoch_total / steps_per_epoch)

    ckpt = Checkpoint(params=params, adam=adam, step=step, config=config.to_dict())
    if metrics_path is not None:
        write_metrics(metrics_path, metrics)
    return TrainResult(checkpoint=ckpt, metrics=metrics, epoch_losses=epoch_losses)


def write_metrics(path, metrics) -> None:
    lines = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in metrics)
    try:
        Path(path).write_text(lines)
    except OSError as exc:
        raise IoError(f"cannot write metrics log {path}: {exc}") from exc
