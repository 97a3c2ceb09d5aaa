# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid sweeps; see ``_sweep_py`` for the reference semantics."""
import numpy as np
cimport cython


def affine_sweep(M, c, x0):
    cdef double complex[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.complex128)
    cdef double complex[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.complex128)
    x0a = np.ascontiguousarray(x0, dtype=np.complex128)
    cdef Py_ssize_t m = cv.shape[0], n = cv.shape[1], r = cv.shape[2]
    if Mv.shape[0] != n or Mv.shape[1] != n or x0a.shape[0] != n or x0a.shape[1] != r:
        raise ValueError("affine_sweep: inconsistent shapes")
    out = np.empty((m + 1, n, r), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef double complex[:, ::1] xv = x0a
    cdef Py_ssize_t i, a, b, q
    cdef double complex acc
    o[0, :, :] = xv
    for i in range(m):
        for a in range(n):
            for q in range(r):
                acc = cv[i, a, q]
                for b in range(n):
                    acc = acc + Mv[a, b] * o[i, b, q]
                o[i + 1, a, q] = acc
    return out


def product_sweep(S, x0):
    cdef double complex[:, :, ::1] Sv = np.ascontiguousarray(S, dtype=np.complex128)
    x0a = np.ascontiguousarray(x0, dtype=np.complex128)
    cdef Py_ssize_t m = Sv.shape[0], n = Sv.shape[1], r = x0a.shape[1]
    if Sv.shape[2] != n or x0a.shape[0] != n:
        raise ValueError("product_sweep: inconsistent shapes")
    out = np.empty((m + 1, n, r), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef double complex[:, ::1] xv = x0a
    cdef Py_ssize_t i, a, b, q
    cdef double complex acc
    o[0, :, :] = xv
    for i in range(m):
        for a in range(n):
            for q in range(r):
                acc = 0
                for b in range(n):
                    acc = acc + Sv[i, a, b] * o[i, b, q]
                o[i + 1, a, q] = acc
    return out
