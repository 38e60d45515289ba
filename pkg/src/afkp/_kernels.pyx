# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled transfer-matrix shooting and segment-overlap kernels.

Mirrors ``_kernels_py`` exactly; see there for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, atan2, floor, fabs, M_PI

cnp.import_array()


def shoot(ks, widths, strengths):
    cdef double[::1] kv = np.ascontiguousarray(ks, dtype=np.float64).ravel()
    cdef double[::1] w = np.ascontiguousarray(widths, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(strengths, dtype=np.float64)
    cdef Py_ssize_t n = kv.shape[0], nseg = w.shape[0]
    values = np.empty(n, dtype=np.float64)
    nodes = np.empty(n, dtype=np.int64)
    cdef double[::1] val = values
    cdef cnp.int64_t[::1] nod = nodes
    cdef Py_ssize_t i, j
    cdef double k, phi, t, m, s
    cdef cnp.int64_t cell
    with nogil:
        for i in range(n):
            k = kv[i]
            phi = 0.0
            cell = 0
            for j in range(nseg):
                t = phi + k * w[j]
                m = floor(t / M_PI)
                phi = t - m * M_PI
                if phi < 0.0:
                    phi = 0.0
                cell += <cnp.int64_t> m
                if phi >= M_PI:
                    phi = 0.0
                    cell += 1
                if j < nseg - 1:
                    s = sin(phi)
                    phi = atan2(s, cos(phi) + (2.0 * hv[j] / k) * s)
                    if phi >= M_PI:
                        phi = 0.0
                        cell += 1
            val[i] = sin(phi) if cell % 2 == 0 else -sin(phi)
            nod[i] = cell - 1 if phi == 0.0 else cell
    shape = np.shape(ks)
    return values.reshape(shape), nodes.reshape(shape)


cdef inline double _half_sinc(double q, double half) nogil:
    # sin(q * half) / q, with its limit at q == 0
    if q == 0.0:
        return half
    return sin(q * half) / q


def overlap_block(k1, a1, b1, k2, a2, b2, lo, hi, double degenerate_tol=1e-8):
    cdef double[::1] K1 = np.ascontiguousarray(k1, dtype=np.float64)
    cdef double[::1] K2 = np.ascontiguousarray(k2, dtype=np.float64)
    cdef double[:, ::1] A1 = np.ascontiguousarray(a1, dtype=np.float64)
    cdef double[:, ::1] B1 = np.ascontiguousarray(b1, dtype=np.float64)
    cdef double[:, ::1] A2 = np.ascontiguousarray(a2, dtype=np.float64)
    cdef double[:, ::1] B2 = np.ascontiguousarray(b2, dtype=np.float64)
    cdef double[::1] LO = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] HI = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n1 = K1.shape[0], n2 = K2.shape[0], nseg = LO.shape[0]
    result = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] out = result
    cdef Py_ssize_t i, j, s
    cdef double q, p, mid, half, acc, x1, y1, x2, y2
    cdef double cq, sq, cp, sp
    with nogil:
        for i in range(n1):
            for j in range(n2):
                q = K1[i] - K2[j]
                if fabs(q) < degenerate_tol * K1[i]:
                    q = 0.0
                p = K1[i] + K2[j]
                acc = 0.0
                for s in range(nseg):
                    mid = 0.5 * (LO[s] + HI[s])
                    half = 0.5 * (HI[s] - LO[s])
                    x1 = A1[i, s]
                    y1 = B1[i, s]
                    x2 = A2[j, s]
                    y2 = B2[j, s]
                    sq = _half_sinc(q, half)
                    sp = _half_sinc(p, half)
                    cq = 2.0 * sq * cos(q * mid)
                    cp = 2.0 * sp * cos(p * mid)
                    sq = 2.0 * sq * sin(q * mid)
                    sp = 2.0 * sp * sin(p * mid)
                    acc += ((x1 * x2 + y1 * y2) * cq + (y1 * y2 - x1 * x2) * cp
                            + (x1 * y2 + y1 * x2) * sp + (x1 * y2 - y1 * x2) * sq)
                out[i, j] = 0.5 * acc
    return result
