"""Poincare-ball primitives for curvature ``c > 0``, with hand-derived pullbacks.

Points are numpy arrays whose last axis holds coordinates; leading axes are
batch axes and broadcast where it makes sense.  All arithmetic is float64.
Every forward function ``f`` has a companion ``f_vjp`` that maps an output
cotangent to input cotangents.

The ball has radius ``1/sqrt(c)``.  Valid points keep
``sqrt(c) * ||x|| <= 1 - BALL_EPS`` so that ``arctanh`` stays finite.
"""

from __future__ import annotations

import numpy as np

from .errors import BoundaryViolation, DenominatorUnderflow, NonFiniteInput

BALL_EPS = 1e-5
DEN_EPS = 1e-15
# slack for points that were projected exactly onto the clipped radius
_BOUNDARY_RTOL = 1e-12
# below this |sqrt(c) r| the tanh/artanh ratios switch to Taylor series
_SERIES_X = 1e-3


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1, keepdims=True))


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum(x * y, axis=-1, keepdims=True)


def check_curvature(c: float) -> float:
    c = float(c)
    if not np.isfinite(c) or c <= 0.0:
        raise ValueError(f"curvature must be a positive finite number, got {c!r}")
    return c


def max_norm(c: float) -> float:
    """Largest Euclidean norm a valid point may have."""
    return (1.0 - BALL_EPS) / np.sqrt(c)


def check_finite(v) -> np.ndarray:
    v = _as_f64(v)
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("input contains NaN or infinite entries")
    return v


def check_in_ball(x, c: float) -> np.ndarray:
    x = check_finite(x)
    c = check_curvature(c)
    limit = (1.0 - BALL_EPS) * (1.0 + _BOUNDARY_RTOL)
    scaled = np.sqrt(c) * _norm(x)
    if np.any(scaled > limit):
        worst = float(np.max(scaled))
        raise BoundaryViolation(
            f"point outside the clipped ball: sqrt(c)*||x|| = {worst:.12g} > {1.0 - BALL_EPS}"
        )
    return x


# -- projection ---------------------------------------------------------------


def project_to_ball(v, c: float) -> np.ndarray:
    """Rescale rows whose norm exceeds ``(1 - BALL_EPS)/sqrt(c)`` onto that radius."""
    v = check_finite(v)
    c = check_curvature(c)
    return _project(v, c)


def _project(v: np.ndarray, c: float) -> np.ndarray:
    m = max_norm(c)
    r = _norm(v)
    scale = np.where(r > m, m / np.maximum(r, DEN_EPS), 1.0)
    return v * scale


def project_to_ball_vjp(v, c: float, g) -> np.ndarray:
    v, g = _as_f64(v), _as_f64(g)
    m = max_norm(c)
    r = _norm(v)
    clipped = r > m
    safe_r = np.maximum(r, DEN_EPS)
    u = v / safe_r
    rescaled = (m / safe_r) * (g - _dot(g, u) * u)
    return np.where(clipped, rescaled, g)


# -- conformal factor ---------------------------------------------------------


def conformal_factor(x, c: float) -> np.ndarray:
    """``2 / (1 - c ||x||^2)`` over the last axis."""
    x = check_in_ball(x, c)
    return 2.0 / (1.0 - c * np.sum(x * x, axis=-1))


# -- Mobius addition ----------------------------------------------------------


def _mobius_parts(x, y, c):
    xy = _dot(x, y)
    x2 = _dot(x, x)
    y2 = _dot(y, y)
    a = 1.0 + 2.0 * c * xy + c * y2
    b = 1.0 - c * x2
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    return xy, x2, y2, a, b, den


def mobius_add(x, y, c: float) -> np.ndarray:
    x = check_in_ball(x, c)
    y = check_in_ball(y, c)
    return _mobius_add(x, y, c)


def _mobius_add(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    _, _, _, a, b, den = _mobius_parts(x, y, c)
    if np.any(np.abs(den) < DEN_EPS):
        raise DenominatorUnderflow("Mobius denominator underflow (near-antipodal boundary points)")
    return _project((a * x + b * y) / den, c)


def mobius_add_vjp(x, y, c: float, g):
    x, y, g = _as_f64(x), _as_f64(y), _as_f64(g)
    xy, x2, y2, a, b, den = _mobius_parts(x, y, c)
    num = a * x + b * y
    g = project_to_ball_vjp(num / den, c, g)
    gx_dot = _dot(g, x)
    gy_dot = _dot(g, y)
    gn = _dot(g, num) / (den * den)
    # d num/dx^T g and d num/dy^T g, then the quotient rule through den
    jx = a * g + 2.0 * c * gx_dot * y - 2.0 * c * gy_dot * x
    jy = b * g + 2.0 * c * gx_dot * (x + y)
    grad_den_x = 2.0 * c * y + 2.0 * c * c * y2 * x
    grad_den_y = 2.0 * c * x + 2.0 * c * c * x2 * y
    gx = jx / den - gn * grad_den_x
    gy = jy / den - gn * grad_den_y
    return gx, gy


# -- distance -----------------------------------------------------------------


def hyp_distance(x, y, c: float) -> np.ndarray:
    """``(2/sqrt(c)) * artanh(sqrt(c) * ||(-x) + y||)`` with Mobius ``+``.

    Reduces to ``2 ||x - y||`` as ``c -> 0``.
    """
    x = check_in_ball(x, c)
    y = check_in_ball(y, c)
    w = _mobius_add(-x, y, c)
    s = np.sqrt(c)
    return (2.0 / s) * np.arctanh(s * _norm(w))[..., 0]


def hyp_distance_vjp(x, y, c: float, g):
    x, y = _as_f64(x), _as_f64(y)
    g = _as_f64(g)[..., None]
    w = _mobius_add(-x, y, c)
    r = _norm(w)
    coef = np.where(r > 0.0, 2.0 / (np.maximum(r, DEN_EPS) * (1.0 - c * r * r)), 0.0)
    gw = g * coef * w
    gx_neg, gy = mobius_add_vjp(-x, y, c, gw)
    return -gx_neg, gy


# -- distance to the origin ---------------------------------------------------


def dist_to_origin(x, c: float) -> np.ndarray:
    x = check_in_ball(x, c)
    s = np.sqrt(c)
    return (2.0 / s) * np.arctanh(s * _norm(x))[..., 0]


def dist_to_origin_vjp(x, c: float, g) -> np.ndarray:
    x = _as_f64(x)
    g = _as_f64(g)[..., None]
    r = _norm(x)
    coef = np.where(r > 0.0, 2.0 / (np.maximum(r, DEN_EPS) * (1.0 - c * r * r)), 0.0)
    return g * coef * x


# -- exponential / logarithmic maps at the origin ------------------------------
#
# Both maps have the form out = phi(s r) v with r = ||v||, s = sqrt(c).
# The pullback is phi g + c psi(s r) (g . v) v with psi(t) = phi'(t) / t.


def _tanh_ratio(t):
    small = t < _SERIES_X
    safe = np.where(small, 1.0, t)
    t2 = t * t
    phi = np.where(small, 1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0, np.tanh(safe) / safe)
    sech2 = 1.0 / np.cosh(np.minimum(safe, 350.0)) ** 2
    psi_big = (safe * sech2 - np.tanh(safe)) / safe**3
    psi = np.where(small, -2.0 / 3.0 + 8.0 * t2 / 15.0, psi_big)
    return phi, psi


def _artanh_ratio(t):
    small = t < _SERIES_X
    safe = np.where(small, 0.5, t)
    t2 = t * t
    phi = np.where(small, 1.0 + t2 / 3.0 + t2 * t2 / 5.0, np.arctanh(safe) / safe)
    psi_big = (safe / (1.0 - safe * safe) - np.arctanh(safe)) / safe**3
    psi = np.where(small, 2.0 / 3.0 + 4.0 * t2 / 5.0, psi_big)
    return phi, psi


def exp_map_0(v, c: float) -> np.ndarray:
    """Map a tangent vector at the origin into the ball."""
    v = check_finite(v)
    c = check_curvature(c)
    phi, _ = _tanh_ratio(np.sqrt(c) * _norm(v))
    return _project(phi * v, c)


def exp_map_0_vjp(v, c: float, g) -> np.ndarray:
    v, g = _as_f64(v), _as_f64(g)
    phi, psi = _tanh_ratio(np.sqrt(c) * _norm(v))
    g = project_to_ball_vjp(phi * v, c, g)
    return phi * g + c * psi * _dot(g, v) * v


def log_map_0(x, c: float) -> np.ndarray:
    """Inverse of :func:`exp_map_0`."""
    x = check_in_ball(x, c)
    phi, _ = _artanh_ratio(np.sqrt(c) * _norm(x))
    return phi * x


def log_map_0_vjp(x, c: float, g) -> np.ndarray:
    x, g = _as_f64(x), _as_f64(g)
    phi, psi = _artanh_ratio(np.sqrt(c) * _norm(x))
    return phi * g + c * psi * _dot(g, x) * x


def exp_map(x, v, c: float) -> np.ndarray:
    """Exponential map at an arbitrary base point ``x``.

    The training pipeline only uses the base-0 form.
    """
    x = check_in_ball(x, c)
    v = check_finite(v)
    lam = 2.0 / (1.0 - c * _dot(x, x))
    return _mobius_add(x, exp_map_0(lam * v / 2.0, c), c)
