"""Feature files, class-range splits, and the synthetic hierarchical generator.

HYPF layout (little-endian)::

    magic   4s   b"HYPF"
    version u32
    count   u64
    dim     u32
    lwidth  u32  label width in bytes (always 4)
    count x (dim x f32, u32 label)
    crc32   u32  over everything before it
"""

from __future__ import annotations

import math
import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimensionMismatch,
    IoError,
    NonFiniteInput,
    SplitError,
    UnknownClass,
    VersionMismatch,
)

FEATURE_MAGIC = b"HYPF"
FEATURE_VERSION = 1
_FEATURE_HEADER = struct.Struct("<4sIQII")
_LABEL_WIDTH = 4


@dataclass(frozen=True)
class FeatureRecord:
    id: int
    feature: np.ndarray
    label: int


@dataclass
class FeatureSet:
    """Row-aligned feature matrix (stored float32) and integer labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            if self.features.size == 0:
                self.features = self.features.reshape(0, 0)
            else:
                raise DimensionMismatch(f"features must be 2-d, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatch(
                f"{self.features.shape[0]} feature rows but labels have shape {self.labels.shape}"
            )
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteInput("features contain NaN or infinite entries")
        if np.any(self.labels < 0) or np.any(self.labels > 0xFFFFFFFF):
            raise ValueError("labels must fit in an unsigned 32-bit integer")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def as_float64(self) -> np.ndarray:
        return self.features.astype(np.float64)

    def records(self) -> Iterator[FeatureRecord]:
        for i in range(len(self)):
            yield FeatureRecord(id=i, feature=self.features[i], label=int(self.labels[i]))

    def subset(self, mask_or_index) -> "FeatureSet":
        return FeatureSet(self.features[mask_or_index], self.labels[mask_or_index])

    @classmethod
    def from_records(cls, records: Iterable[FeatureRecord], dim: int | None = None) -> "FeatureSet":
        records = list(records)
        dims = {np.asarray(r.feature).shape for r in records}
        if len(dims) > 1:
            raise DimensionMismatch(f"records have mixed feature shapes: {sorted(dims)}")
        if not records:
            return cls(np.zeros((0, dim or 0), dtype=np.float32), np.zeros(0, dtype=np.int64))
        return cls(np.stack([r.feature for r in records]), np.array([r.label for r in records]))


# -- HYPF reader / writer -----------------------------------------------------------


def feature_bytes(data: FeatureSet) -> bytes:
    n, d = data.features.shape
    rec = np.dtype([("x", "<f4", (d,)), ("y", "<u4")])
    rows = np.empty(n, dtype=rec)
    rows["x"] = data.features
    rows["y"] = data.labels
    body = _FEATURE_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, n, d, _LABEL_WIDTH) + rows.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def features_from_bytes(raw: bytes) -> FeatureSet:
    if len(raw) < 8 or raw[:4] != FEATURE_MAGIC:
        raise BadMagic("not a HYPF feature file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FEATURE_VERSION:
        raise VersionMismatch(f"HYPF version {version} is not supported (expected {FEATURE_VERSION})")
    if len(raw) < _FEATURE_HEADER.size + 4:
        raise ChecksumMismatch("HYPF file truncated inside the header")
    _, _, n, d, lwidth = _FEATURE_HEADER.unpack_from(raw, 0)
    if lwidth != _LABEL_WIDTH:
        raise DimensionMismatch(f"unsupported label width {lwidth}")
    expected = _FEATURE_HEADER.size + n * (4 * d + _LABEL_WIDTH) + 4
    if len(raw) != expected:
        raise ChecksumMismatch(f"HYPF payload is {len(raw)} bytes, header implies {expected}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("HYPF CRC32 mismatch")
    rec = np.dtype([("x", "<f4", (d,)), ("y", "<u4")])
    rows = np.frombuffer(body, dtype=rec, count=n, offset=_FEATURE_HEADER.size)
    return FeatureSet(rows["x"].astype(np.float32).reshape(n, d), rows["y"].astype(np.int64))


def write_features(path, data) -> None:
    if not isinstance(data, FeatureSet):
        data = FeatureSet.from_records(data)
    payload = feature_bytes(data)
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_features(path) -> FeatureSet:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return features_from_bytes(raw)


# -- splits ------------------------------------------------------------------------

_RANGE = re.compile(r"^(\d+)(?:\s*-\s*(\d+))?$")


@dataclass(frozen=True)
class SplitSpec:
    """Named, disjoint sets of inclusive class-id ranges."""

    parts: dict

    def __post_init__(self):
        owner = {}
        for name, ranges in self.parts.items():
            for lo, hi in ranges:
                if lo > hi:
                    raise SplitError(f"range {lo}-{hi} in {name!r} is reversed")
                for other, (olo, ohi) in owner.items():
                    if lo <= ohi and olo <= hi:
                        raise SplitError(
                            f"range {lo}-{hi} in {name!r} overlaps {olo}-{ohi} in {other[0]!r}"
                        )
                owner[(name, lo, hi)] = (lo, hi)

    def part_of(self, label: int) -> str | None:
        for name, ranges in self.parts.items():
            for lo, hi in ranges:
                if lo <= label <= hi:
                    return name
        return None


def parse_split(text: str) -> SplitSpec:
    """Parse ``name = 0-99, 120`` lines; ``#`` starts a comment, empty values are allowed."""
    parts: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SplitError(f"line {lineno}: expected 'name = ranges'")
        name, _, value = (s.strip() for s in line.partition("="))
        if not name or name in parts:
            raise SplitError(f"line {lineno}: missing or duplicate part name {name!r}")
        ranges = []
        for item in filter(None, (s.strip() for s in value.split(","))):
            m = _RANGE.match(item)
            if not m:
                raise SplitError(f"line {lineno}: bad range {item!r}")
            lo = int(m.group(1))
            ranges.append((lo, int(m.group(2)) if m.group(2) else lo))
        parts[name] = ranges
    return SplitSpec(parts)


def read_split(path) -> SplitSpec:
    try:
        return parse_split(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read split file {path}: {exc}") from exc


def first_classes_split(n_train: int, n_total: int) -> SplitSpec:
    """The common retrieval convention: first ``n_train`` classes train, rest test."""
    test = [(n_train, n_total - 1)] if n_total > n_train else []
    return SplitSpec({"train": [(0, n_train - 1)], "test": test})


def apply_split(data: FeatureSet, spec: SplitSpec) -> dict:
    """Partition by class id; every label must belong to exactly one part."""
    lookup = {int(y): spec.part_of(int(y)) for y in np.unique(data.labels)}
    missing = sorted(y for y, name in lookup.items() if name is None)
    if missing:
        raise UnknownClass(f"labels not covered by the split: {missing[:10]}")
    assigned = np.array([lookup[int(y)] for y in data.labels], dtype=object)
    return {name: data.subset(assigned == name) for name in spec.parts}


# -- synthetic generator --------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Balanced binary tree of class centres plus isotropic Gaussian samples.

    ``separation`` is the distance between sibling leaf centres; offsets
    double at each level towards the root.  ``sigma`` is the per-coordinate
    noise standard deviation.
    """

    num_classes: int = 10
    per_class: int = 50
    dim: int = 64
    depth: int | None = None
    sigma: float = 0.0125
    separation: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1 or self.per_class < 1 or self.dim < 1:
            raise ValueError("num_classes, per_class and dim must be positive")
        if self.sigma < 0 or self.separation <= 0:
            raise ValueError("sigma must be non-negative and separation positive")
        if self.depth is not None and 2**self.depth < self.num_classes:
            raise ValueError(f"depth {self.depth} has fewer than {self.num_classes} leaves")

    @property
    def tree_depth(self) -> int:
        if self.depth is not None:
            return self.depth
        return max(1, math.ceil(math.log2(self.num_classes)))


def _synth_rngs(seed: int):
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(2)]


def class_centers(spec: SynthSpec) -> np.ndarray:
    rng = _synth_rngs(spec.seed)[0]
    depth = spec.tree_depth
    nodes = np.zeros((1, spec.dim))
    for level in range(depth):
        half = 0.5 * spec.separation * 2.0 ** (depth - 1 - level)
        dirs = rng.standard_normal((nodes.shape[0], spec.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        nodes = np.stack([nodes + half * dirs, nodes - half * dirs], axis=1).reshape(-1, spec.dim)
    return nodes[: spec.num_classes]


def generate_synthetic(spec: SynthSpec) -> FeatureSet:
    centers = class_centers(spec)
    rng = _synth_rngs(spec.seed)[1]
    labels = np.repeat(np.arange(spec.num_classes), spec.per_class)
    noise = rng.standard_normal((labels.size, spec.dim)) * spec.sigma
    return FeatureSet(centers[labels] + noise, labels)
