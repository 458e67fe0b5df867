"""Distance-to-origin uncertainty and the batch-relative temperature / margin.

``U(x) = 1 - D(x, 0)`` goes negative once an embedding is farther than one
unit from the origin, so it is floored at ``EPS_U`` before entering the
logarithms below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ball
from .errors import EmptyBatch

EPS_U = 1e-3
TAU_MIN = 1e-3
MARGIN_MIN = 1e-3


@dataclass(frozen=True)
class UncertaintyValue:
    raw: np.ndarray
    clamped: np.ndarray


def uncertainty(x, c: float) -> UncertaintyValue:
    raw = 1.0 - ball.dist_to_origin(x, c)
    return UncertaintyValue(raw=raw, clamped=np.maximum(raw, EPS_U))


def clamped_uncertainty(x, c: float) -> np.ndarray:
    return uncertainty(x, c).clamped


def clamped_uncertainty_vjp(x, c: float, g) -> np.ndarray:
    raw = 1.0 - ball.dist_to_origin(x, c)
    g = np.where(raw > EPS_U, np.asarray(g, dtype=np.float64), 0.0)
    return -ball.dist_to_origin_vjp(x, c, g)


def _log_ratio(u: np.ndarray):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.size == 0:
        raise EmptyBatch("adaptive temperature/margin needs a non-empty batch")
    top = int(np.argmax(u))
    ratio = u / u[top]
    return np.log1p(ratio), ratio, top


def _log_ratio_vjp(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    _, ratio, top = _log_ratio(u)
    umax = u[top]
    dh_dratio = g / (ratio + 1.0)
    grad = dh_dratio / umax
    grad[top] -= np.sum(dh_dratio * ratio) / umax
    return grad


def tau_from_uncertainty(u, scale: float) -> np.ndarray:
    """``log(U_i / max_j U_j + 1) / scale``, floored at ``TAU_MIN``."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    h, _, _ = _log_ratio(u)
    return np.maximum(h / scale, TAU_MIN)


def tau_from_uncertainty_vjp(u, scale: float, g) -> np.ndarray:
    h, _, _ = _log_ratio(u)
    g = np.where(h / scale > TAU_MIN, np.asarray(g, dtype=np.float64), 0.0) / scale
    return _log_ratio_vjp(u, g)


def margin_from_uncertainty(u, c: float) -> np.ndarray:
    """``log(U_i / max_j U_j + 1) * exp(c)``, floored at ``MARGIN_MIN``."""
    h, _, _ = _log_ratio(u)
    return np.maximum(h * np.exp(c), MARGIN_MIN)


def margin_from_uncertainty_vjp(u, c: float, g) -> np.ndarray:
    h, _, _ = _log_ratio(u)
    scale = np.exp(c)
    g = np.where(h * scale > MARGIN_MIN, np.asarray(g, dtype=np.float64), 0.0) * scale
    return _log_ratio_vjp(u, g)


def adaptive_tau(x, c: float, scale: float) -> np.ndarray:
    return tau_from_uncertainty(clamped_uncertainty(x, c), scale)


def adaptive_tau_vjp(x, c: float, scale: float, g) -> np.ndarray:
    u = clamped_uncertainty(x, c)
    return clamped_uncertainty_vjp(x, c, tau_from_uncertainty_vjp(u, scale, g))


def adaptive_margin(x, c: float) -> np.ndarray:
    return margin_from_uncertainty(clamped_uncertainty(x, c), c)


def adaptive_margin_vjp(x, c: float, g) -> np.ndarray:
    u = clamped_uncertainty(x, c)
    return clamped_uncertainty_vjp(x, c, margin_from_uncertainty_vjp(u, c, g))
