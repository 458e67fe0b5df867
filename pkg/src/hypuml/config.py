"""Training configuration shared by the trainer, losses and CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

LOSSES = ("contrastive", "triplet")
MODES = ("adaptive", "fixed")
MINING = ("batch-hard", "batch-all")

# per-loss batch layout defaults (K samples per class, total batch size)
DEFAULT_SAMPLES_PER_CLASS = {"contrastive": 3, "triplet": 2}
DEFAULT_BATCH_SIZE = {"contrastive": 300, "triplet": 200}


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "contrastive"
    mode: str = "adaptive"
    tau: float = 0.2
    margin: float = 0.3
    mining: str = "batch-hard"
    curvature: float = 0.1
    scale: float = 0.02
    lr: float = 3e-5
    weight_decay: float = 0.01
    epochs: int = 50
    batch_size: int | None = None
    samples_per_class: int | None = None
    dim_out: int = 128
    seed: int = 0
    log_interval: int = 10

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mining not in MINING:
            raise ValueError(f"mining must be one of {MINING}, got {self.mining!r}")
        for name in ("tau", "margin", "curvature", "scale", "lr"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.dim_out < 1 or self.log_interval < 1:
            raise ValueError("dim_out and log_interval must be positive")
        k = self.samples_per_class
        if k is not None and k < 2:
            raise ValueError("samples_per_class must be at least 2")
        if self.batch_size is not None:
            if self.batch_size < 1:
                raise ValueError("batch_size must be positive")
            if self.batch_size % self.k != 0:
                raise ValueError(
                    f"batch_size {self.batch_size} is not divisible by samples_per_class {self.k}"
                )

    @property
    def k(self) -> int:
        if self.samples_per_class is not None:
            return self.samples_per_class
        return DEFAULT_SAMPLES_PER_CLASS[self.loss]

    def resolve(self, num_classes: int) -> "TrainConfig":
        """Fill in batch layout defaults for a dataset with ``num_classes`` classes.

        Without an explicit batch size, P is the default batch size divided
        by K, capped at the number of available classes.
        """
        k = self.k
        batch = self.batch_size
        if batch is None:
            p = max(1, min(num_classes, DEFAULT_BATCH_SIZE[self.loss] // k))
            batch = p * k
        return replace(self, samples_per_class=k, batch_size=batch)

    @property
    def classes_per_batch(self) -> int:
        if self.batch_size is None:
            raise ValueError("config is not resolved")
        return self.batch_size // self.k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.canonical_json().encode()).digest()
