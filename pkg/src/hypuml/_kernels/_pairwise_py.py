"""Numpy fallback for the pairwise distance kernels.

Uses the closed form ``||(-x) + y||^2 = ||x - y||^2 / q`` with
``q = 1 - 2c<x,y> + c^2 ||x||^2 ||y||^2``.  Differences are formed directly
(not via a Gram matrix) so near-coincident points keep full precision; rows
are processed in chunks to bound memory.
"""

import numpy as np

BALL_EPS = 1e-5
_CHUNK_ELEMS = 1 << 22


def _chunks(n, m, d):
    step = max(1, _CHUNK_ELEMS // max(1, m * d))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def pairwise_distance(X, Y, c):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n, d = X.shape
    m = Y.shape[0]
    s = np.sqrt(c)
    cap = 1.0 - BALL_EPS
    out = np.empty((n, m), dtype=np.float64)
    y2 = np.einsum("ij,ij->i", Y, Y)
    for sl in _chunks(n, m, d):
        Xc = X[sl]
        diff = Xc[:, None, :] - Y[None, :, :]
        a = np.einsum("ijk,ijk->ij", diff, diff)
        x2 = np.einsum("ij,ij->i", Xc, Xc)
        p = Xc @ Y.T
        q = 1.0 - 2.0 * c * p + c * c * x2[:, None] * y2[None, :]
        st = np.minimum(s * np.sqrt(a / q), cap)
        out[sl] = (2.0 / s) * np.arctanh(st)
    return out


def pairwise_distance_backward(X, Y, c, G):
    """Return ``(gX, gY)`` for ``sum(G * pairwise_distance(X, Y, c))``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    G = np.ascontiguousarray(G, dtype=np.float64)
    n, d = X.shape
    m = Y.shape[0]
    s = np.sqrt(c)
    cap = 1.0 - BALL_EPS
    gX = np.zeros_like(X)
    gY = np.zeros_like(Y)
    y2 = np.einsum("ij,ij->i", Y, Y)
    for sl in _chunks(n, m, d):
        Xc = X[sl]
        diff = Xc[:, None, :] - Y[None, :, :]
        a = np.einsum("ijk,ijk->ij", diff, diff)
        x2 = np.einsum("ij,ij->i", Xc, Xc)
        p = Xc @ Y.T
        q = 1.0 - 2.0 * c * p + c * c * x2[:, None] * y2[None, :]
        u = a / q
        t = np.sqrt(u)
        active = (t > 0.0) & (s * t < cap)
        dd_du = np.where(active, 1.0 / (np.where(active, t, 1.0) * (1.0 - c * u)), 0.0)
        w = G[sl] * dd_du
        w_q = w / q
        w_a = w * 2.0 * c * a / (q * q)
        # du/dx = 2(x - y)/q + (2ca/q^2)(y - cY x);  du/dy = -2(x - y)/q + (2ca/q^2)(x - cX y)
        gdiff = 2.0 * np.einsum("ij,ijk->ik", w_q, diff)
        gX[sl] += gdiff + w_a @ Y - c * (w_a @ y2)[:, None] * Xc
        gY -= 2.0 * np.einsum("ij,ijk->jk", w_q, diff)
        gY += w_a.T @ Xc - c * (w_a.T @ x2)[:, None] * Y
    return gX, gY
