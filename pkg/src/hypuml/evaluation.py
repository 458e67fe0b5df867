"""Query/gallery retrieval evaluation with CMC recall@k."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ball
from ._kernels import pairwise_distance
from .errors import CurvatureMismatch, DimensionMismatch, IoError, LabelLengthMismatch

PROTOCOLS = ("same-set", "query-gallery")
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class BallPoints:
    """A batch of points on one Poincare ball."""

    coords: np.ndarray
    c: float

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise DimensionMismatch(f"ball points must be a (N, n) matrix, got shape {coords.shape}")
        object.__setattr__(self, "coords", ball.check_in_ball(coords, self.c))

    def __len__(self) -> int:
        return self.coords.shape[0]


def distance_matrix(queries: BallPoints, gallery: BallPoints) -> np.ndarray:
    if queries.c != gallery.c:
        raise CurvatureMismatch(f"query curvature {queries.c} != gallery curvature {gallery.c}")
    if queries.coords.shape[1] != gallery.coords.shape[1]:
        raise DimensionMismatch("queries and gallery have different dimensions")
    if len(queries) == 0 or len(gallery) == 0:
        return np.zeros((len(queries), len(gallery)))
    return pairwise_distance(queries.coords, gallery.coords, queries.c)


@dataclass
class RetrievalReport:
    ks: tuple
    recall: tuple
    num_queries: int
    num_gallery: int
    protocol: str
    degenerate_queries: int = 0

    def recall_at(self, k: int) -> float:
        return self.recall[self.ks.index(k)]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "num_queries": self.num_queries,
            "num_gallery": self.num_gallery,
            "degenerate_queries": self.degenerate_queries,
            "recall": [{"k": k, "recall": r} for k, r in zip(self.ks, self.recall)],
        }

    def format(self) -> str:
        lines = [
            f"protocol   {self.protocol}",
            f"queries    {self.num_queries}  (degenerate: {self.degenerate_queries})",
            f"gallery    {self.num_gallery}",
        ]
        width = max(len(str(k)) for k in self.ks) if self.ks else 1
        lines += [f"recall@{k:<{width}}  {r:.4f}" for k, r in zip(self.ks, self.recall)]
        return "\n".join(lines)


def first_match_ranks(dist, query_labels, gallery_labels, protocol="same-set") -> np.ndarray:
    """1-based rank of the first same-label gallery item per query; 0 if none.

    Ties in distance are broken by gallery index.  In the same-set protocol
    the query's own entry (the diagonal) is skipped.
    """
    dist = np.asarray(dist, dtype=np.float64)
    q = np.asarray(query_labels)
    g = np.asarray(gallery_labels)
    if dist.shape != (q.size, g.size):
        raise LabelLengthMismatch(
            f"distance matrix {dist.shape} vs {q.size} query / {g.size} gallery labels"
        )
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    if protocol == "same-set" and q.size != g.size:
        raise LabelLengthMismatch("same-set protocol needs a square distance matrix")
    ranks = np.zeros(q.size, dtype=np.int64)
    for start in range(0, q.size, _ROW_CHUNK):
        rows = np.arange(start, min(q.size, start + _ROW_CHUNK))
        order = np.argsort(dist[rows], axis=1, kind="stable")
        if protocol == "same-set":
            keep = order != rows[:, None]
            order = order[keep].reshape(rows.size, g.size - 1)
        hits = g[order] == q[rows, None]
        found = hits.any(axis=1)
        ranks[rows] = np.where(found, np.argmax(hits, axis=1) + 1, 0)
    return ranks


def cmc(dist, query_labels, gallery_labels, ks=(1, 2, 4, 8), protocol="same-set") -> RetrievalReport:
    ks = tuple(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise ValueError("k values must be positive")
    ranks = first_match_ranks(dist, query_labels, gallery_labels, protocol)
    valid = ranks > 0
    n_valid = int(valid.sum())
    if n_valid:
        recall = tuple(float(np.mean(ranks[valid] <= k)) for k in ks)
    else:
        recall = tuple(0.0 for _ in ks)
    n_gallery = dist.shape[1] - (1 if protocol == "same-set" else 0)
    return RetrievalReport(
        ks=ks,
        recall=recall,
        num_queries=n_valid,
        num_gallery=max(n_gallery, 0),
        protocol=protocol,
        degenerate_queries=int(ranks.size - n_valid),
    )


def evaluate(queries: BallPoints, query_labels, gallery: BallPoints | None = None,
             gallery_labels=None, ks=(1, 2, 4, 8)) -> RetrievalReport:
    """Same-set protocol when no gallery is given, query-gallery otherwise."""
    if gallery is None:
        return cmc(distance_matrix(queries, queries), query_labels, query_labels, ks, "same-set")
    return cmc(distance_matrix(queries, gallery), query_labels, gallery_labels, ks, "query-gallery")


def write_report(path, report: RetrievalReport) -> None:
    try:
        Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc
