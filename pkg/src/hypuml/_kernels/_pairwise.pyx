# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise hyperbolic distance kernels (same contract as _pairwise_py)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atanh

cnp.import_array()

cdef double BALL_EPS = 1e-5


def pairwise_distance(X, Y, double c):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = yv.shape[0], d = xv.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double[::1] y2 = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double s = sqrt(c), cap = 1.0 - BALL_EPS
    cdef double x2, a, p, q, diff, st
    for j in range(m):
        a = 0.0
        for k in range(d):
            a += yv[j, k] * yv[j, k]
        y2[j] = a
    with nogil:
        for i in range(n):
            x2 = 0.0
            for k in range(d):
                x2 += xv[i, k] * xv[i, k]
            for j in range(m):
                a = 0.0
                p = 0.0
                for k in range(d):
                    diff = xv[i, k] - yv[j, k]
                    a += diff * diff
                    p += xv[i, k] * yv[j, k]
                q = 1.0 - 2.0 * c * p + c * c * x2 * y2[j]
                st = s * sqrt(a / q)
                if st > cap:
                    st = cap
                ov[i, j] = (2.0 / s) * atanh(st)
    return out


def pairwise_distance_backward(X, Y, double c, G):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = yv.shape[0], d = xv.shape[1]
    gX = np.zeros((n, d), dtype=np.float64)
    gY = np.zeros((m, d), dtype=np.float64)
    cdef double[:, ::1] gxv = gX
    cdef double[:, ::1] gyv = gY
    cdef double[::1] y2 = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double s = sqrt(c), cap = 1.0 - BALL_EPS
    cdef double x2, a, p, q, u, t, diff, w, wq, wa
    for j in range(m):
        a = 0.0
        for k in range(d):
            a += yv[j, k] * yv[j, k]
        y2[j] = a
    with nogil:
        for i in range(n):
            x2 = 0.0
            for k in range(d):
                x2 += xv[i, k] * xv[i, k]
            for j in range(m):
                if gv[i, j] == 0.0:
                    continue
                a = 0.0
                p = 0.0
                for k in range(d):
                    diff = xv[i, k] - yv[j, k]
                    a += diff * diff
                    p += xv[i, k] * yv[j, k]
                q = 1.0 - 2.0 * c * p + c * c * x2 * y2[j]
                u = a / q
                t = sqrt(u)
                if t <= 0.0 or s * t >= cap:
                    continue
                w = gv[i, j] / (t * (1.0 - c * u))
                wq = 2.0 * w / q
                wa = w * 2.0 * c * a / (q * q)
                for k in range(d):
                    diff = xv[i, k] - yv[j, k]
                    gxv[i, k] += wq * diff + wa * (yv[j, k] - c * y2[j] * xv[i, k])
                    gyv[j, k] += -wq * diff + wa * (xv[i, k] - c * x2 * yv[j, k])
    return gX, gY
