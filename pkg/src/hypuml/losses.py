"""Hyperbolic contrastive and triplet losses with analytic gradients.

Both losses return a :class:`LossOutput` holding the scalar loss, its
gradient with respect to the batch embeddings, and per-sample diagnostics.
In adaptive mode the temperature (contrastive) or margin (triplet) is a
function of the embeddings, and the gradient flows through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ball
from . import uncertainty as unc
from ._kernels import pairwise_distance, pairwise_distance_backward
from .errors import CurvatureMismatch, DimensionMismatch, NoPositivePairs, NoValidTriplets
from .head import head_backward, head_forward


@dataclass
class LossOutput:
    loss: float
    grad: np.ndarray
    weights: np.ndarray  # tau (contrastive) or alpha (triplet) per sample
    uncertainty: np.ndarray
    terms: np.ndarray | None = None  # per-anchor loss before the batch average


def _prepare(embeddings, labels, c):
    emb = ball.check_in_ball(embeddings, c)
    if emb.ndim != 2:
        raise DimensionMismatch(f"embeddings must be a (B, n) matrix, got shape {emb.shape}")
    labels = np.asarray(labels)
    if labels.shape != (emb.shape[0],):
        raise DimensionMismatch(f"expected {emb.shape[0]} labels, got shape {labels.shape}")
    same = labels[:, None] == labels[None, :]
    eye = np.eye(len(labels), dtype=bool)
    return emb, same & ~eye, ~same


def _distance_grad(emb, c, g_dist):
    gx, gy = pairwise_distance_backward(emb, emb, c, g_dist)
    return gx + gy


def contrastive_loss(
    embeddings,
    labels,
    c: float,
    *,
    mode: str = "adaptive",
    scale: float = 0.02,
    tau: float = 0.2,
) -> LossOutput:
    """Softmax over negative hyperbolic distances, one term per ordered positive pair.

    ``mode="fixed"`` uses the constant temperature ``tau``; ``"adaptive"``
    derives a per-anchor temperature from the batch uncertainties.
    """
    emb, pos, _ = _prepare(embeddings, labels, c)
    n_pos = pos.sum(axis=1)
    if np.any(n_pos == 0):
        raise NoPositivePairs("every sample needs at least one same-class partner in the batch")
    n_pairs = float(n_pos.sum())
    b = emb.shape[0]
    u = unc.clamped_uncertainty(emb, c)
    if mode == "adaptive":
        taus = unc.tau_from_uncertainty(u, scale)
    elif mode == "fixed":
        if tau <= 0:
            raise ValueError("fixed temperature must be positive")
        taus = np.full(b, float(tau))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    sim = -pairwise_distance(emb, emb, c)
    logits = sim / taus[:, None]
    off_diag = ~np.eye(b, dtype=bool)
    masked = np.where(off_diag, logits, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    expd = np.exp(masked - row_max)
    denom = expd.sum(axis=1, keepdims=True)
    lse = (row_max + np.log(denom))[:, 0]
    pos_logit_sum = np.where(pos, logits, 0.0).sum(axis=1)
    anchor_sums = n_pos * lse - pos_logit_sum
    loss = float(np.sum(anchor_sums) / n_pairs)

    soft = expd / denom
    g_logits = (n_pos[:, None] * soft - pos) / n_pairs
    g_logits[~off_diag] = 0.0
    g_sim = g_logits / taus[:, None]
    grad = _distance_grad(emb, c, -g_sim)
    if mode == "adaptive":
        g_tau = -np.sum(g_logits * sim, axis=1) / taus**2
        g_u = unc.tau_from_uncertainty_vjp(u, scale, g_tau)
        grad = grad + unc.clamped_uncertainty_vjp(emb, c, g_u)
    return LossOutput(loss=loss, grad=grad, weights=taus, uncertainty=u, terms=anchor_sums / n_pos)


def triplet_loss(
    embeddings,
    labels,
    c: float,
    *,
    mode: str = "adaptive",
    margin: float = 0.3,
    mining: str = "batch-hard",
) -> LossOutput:
    """Hinge on ``d(a, p) - d(a, n) + alpha`` with hyperbolic distances.

    Batch-hard mining averages over anchors; batch-all averages over every
    valid (anchor, positive, negative) triple.  Mining ties go to the lowest
    index.
    """
    emb, pos, neg = _prepare(embeddings, labels, c)
    valid = pos.any(axis=1) & neg.any(axis=1)
    if not valid.any():
        raise NoValidTriplets("batch has no anchor with both a positive and a negative")
    b = emb.shape[0]
    u = unc.clamped_uncertainty(emb, c)
    if mode == "adaptive":
        alphas = unc.margin_from_uncertainty(u, c)
    elif mode == "fixed":
        if margin <= 0:
            raise ValueError("fixed margin must be positive")
        alphas = np.full(b, float(margin))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    dist = pairwise_distance(emb, emb, c)
    g_dist = np.zeros_like(dist)
    g_alpha = np.zeros(b)
    anchors = np.flatnonzero(valid)
    if mining == "batch-hard":
        hardest_pos = np.argmax(np.where(pos, dist, -np.inf), axis=1)
        hardest_neg = np.argmin(np.where(neg, dist, np.inf), axis=1)
        a = anchors
        m = dist[a, hardest_pos[a]] - dist[a, hardest_neg[a]] + alphas[a]
        active = (m > 0.0).astype(np.float64) / len(a)
        terms = np.maximum(m, 0.0)
        loss = float(np.sum(terms) / len(a))
        np.add.at(g_dist, (a, hardest_pos[a]), active)
        np.add.at(g_dist, (a, hardest_neg[a]), -active)
        g_alpha[a] = active
    elif mining == "batch-all":
        total = 0.0
        count = 0
        per_anchor, terms = [], []
        for a in anchors:
            dp = dist[a, pos[a]]
            dn = dist[a, neg[a]]
            m = dp[:, None] - dn[None, :] + alphas[a]
            per_anchor.append((a, m > 0.0))
            hinge = np.maximum(m, 0.0)
            terms.append(float(np.mean(hinge)))
            total += float(np.sum(hinge))
            count += m.size
        loss = total / count
        terms = np.array(terms)
        for a, act in per_anchor:
            g_dist[a, pos[a]] += act.sum(axis=1) / count
            g_dist[a, neg[a]] -= act.sum(axis=0) / count
            g_alpha[a] = act.sum() / count
    else:
        raise ValueError(f"unknown mining strategy {mining!r}")

    grad = _distance_grad(emb, c, g_dist)
    if mode == "adaptive":
        g_u = unc.margin_from_uncertainty_vjp(u, c, g_alpha)
        grad = grad + unc.clamped_uncertainty_vjp(emb, c, g_u)
    return LossOutput(loss=loss, grad=grad, weights=alphas, uncertainty=u, terms=terms)


def compute_loss(embeddings, labels, config) -> LossOutput:
    """Dispatch on a :class:`~hypuml.config.TrainConfig`."""
    if config.loss == "contrastive":
        return contrastive_loss(
            embeddings, labels, config.curvature, mode=config.mode, scale=config.scale, tau=config.tau
        )
    return triplet_loss(
        embeddings, labels, config.curvature, mode=config.mode, margin=config.margin, mining=config.mining
    )


@dataclass
class StepOutput:
    loss: LossOutput
    grad_W: np.ndarray
    grad_b: np.ndarray


def loss_step(features, labels, params, config) -> StepOutput:
    """Head forward, loss, and backward to the head parameters in one call."""
    if params.c != config.curvature:
        raise CurvatureMismatch(f"head curvature {params.c} != config curvature {config.curvature}")
    emb = head_forward(features, params)
    out = compute_loss(emb, labels, config)
    g_w, g_b = head_backward(features, params, out.grad)
    return StepOutput(loss=out, grad_W=g_w, grad_b=g_b)
