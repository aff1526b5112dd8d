# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled WENO5 kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef double WENO_EPS_C = 1e-6
cdef double C1312 = 13.0 / 12.0
WENO_EPS = WENO_EPS_C


cdef inline double _combine(double v0, double v1, double v2, double v3, double v4) noexcept nogil:
    cdef double q0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0
    cdef double q1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0
    cdef double q2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0
    cdef double d0 = v0 - 2.0 * v1 + v2
    cdef double e0 = v0 - 4.0 * v1 + 3.0 * v2
    cdef double d1 = v1 - 2.0 * v2 + v3
    cdef double e1 = v1 - v3
    cdef double d2 = v2 - 2.0 * v3 + v4
    cdef double e2 = 3.0 * v2 - 4.0 * v3 + v4
    cdef double s0 = WENO_EPS_C + (C1312 * (d0 * d0) + 0.25 * (e0 * e0))
    cdef double s1 = WENO_EPS_C + (C1312 * (d1 * d1) + 0.25 * (e1 * e1))
    cdef double s2 = WENO_EPS_C + (C1312 * (d2 * d2) + 0.25 * (e2 * e2))
    cdef double a0 = 0.1 / (s0 * s0)
    cdef double a1 = 0.6 / (s1 * s1)
    cdef double a2 = 0.3 / (s2 * s2)
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def weno5_combine(v0, v1, v2, v3, v4):
    """Scalar entry point; arrays are delegated to ``weno5_faces`` callers."""
    return _combine(float(v0), float(v1), float(v2), float(v3), float(v4))


def _as_2d(a):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim == 1:
        return arr.reshape(-1, 1), True
    return arr.reshape(arr.shape[0], -1), False


def weno5_faces(v):
    cdef double[:, ::1] src
    src_arr, flat = _as_2d(v)
    shape = np.shape(v)
    src = src_arr
    cdef Py_ssize_t nf = src.shape[0] - 4
    cdef Py_ssize_t m = src.shape[1]
    cdef Py_ssize_t i, k
    if nf < 0:
        nf = 0
    out = np.empty((nf, m), dtype=np.float64)
    cdef double[:, ::1] dst = out
    with nogil:
        for i in range(nf):
            for k in range(m):
                dst[i, k] = _combine(src[i, k], src[i + 1, k], src[i + 2, k],
                                     src[i + 3, k], src[i + 4, k])
    if flat:
        return out.reshape(nf)
    return out.reshape((nf,) + tuple(shape[1:]))


def weno5_divergence(fp, fm, double dx):
    cdef double[:, ::1] p
    cdef double[:, ::1] q
    p_arr, flat = _as_2d(fp)
    q_arr, _ = _as_2d(fm)
    shape = np.shape(fp)
    p = p_arr
    q = q_arr
    cdef Py_ssize_t n = p.shape[0] - 6
    cdef Py_ssize_t m = p.shape[1]
    cdef Py_ssize_t i, k
    cdef double left, right
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] dst = out
    with nogil:
        for k in range(m):
            # face i + 1/2 of the extended array, starting at i = 2
            left = (_combine(p[0, k], p[1, k], p[2, k], p[3, k], p[4, k])
                    + _combine(q[5, k], q[4, k], q[3, k], q[2, k], q[1, k]))
            for i in range(n):
                right = (_combine(p[i + 1, k], p[i + 2, k], p[i + 3, k], p[i + 4, k], p[i + 5, k])
                         + _combine(q[i + 6, k], q[i + 5, k], q[i + 4, k], q[i + 3, k], q[i + 2, k]))
                dst[i, k] = -(right - left) / dx
                left = right
    if flat:
        return out.reshape(n)
    return out.reshape((n,) + tuple(shape[1:]))
