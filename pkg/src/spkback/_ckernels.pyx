# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial-scoring kernels; see ``_pykernels`` for the reference versions."""

from libc.stdint cimport int64_t


def llr_pairs(const double[:, ::1] U1, const double[:, ::1] U2,
              const int64_t[::1] i1, const int64_t[::1] i2,
              const double[::1] psi, const double[::1] c, const double[::1] m,
              double[::1] out):
    cdef Py_ssize_t n = i1.shape[0], d = psi.shape[0]
    cdef Py_ssize_t k, j, a, b
    cdef double acc, x, y, diff
    if U1.shape[1] != d or U2.shape[1] != d:
        raise ValueError("dimension mismatch")
    if i2.shape[0] != n or out.shape[0] != n:
        raise ValueError("length mismatch")
    with nogil:
        for k in range(n):
            a = i1[k]
            b = i2[k]
            acc = 0.0
            for j in range(d):
                x = U1[a, j]
                y = U2[b, j]
                diff = x - y
                acc = acc + (c[j] + m[j] * (2.0 * x * y - psi[j] * diff * diff))
            out[k] = 0.5 * acc


def dot_pairs(const double[:, ::1] X1, const double[:, ::1] X2,
              const int64_t[::1] i1, const int64_t[::1] i2,
              double[::1] out):
    cdef Py_ssize_t n = i1.shape[0], d = X1.shape[1]
    cdef Py_ssize_t k, j, a, b
    cdef double acc
    if X2.shape[1] != d:
        raise ValueError("dimension mismatch")
    if i2.shape[0] != n or out.shape[0] != n:
        raise ValueError("length mismatch")
    with nogil:
        for k in range(n):
            a = i1[k]
            b = i2[k]
            acc = 0.0
            for j in range(d):
                acc = acc + X1[a, j] * X2[b, j]
            out[k] = acc
