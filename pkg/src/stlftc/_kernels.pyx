# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled predecessor kernels over a successor table.

``succ[i, j]`` is the flat cell reached from cell ``i`` under input ``j``,
or -1 when the step leaves the lattice (inadmissible input).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pred_exists(const int[:, ::1] succ, const unsigned char[::1] mask):
    cdef Py_ssize_t n = succ.shape[0], m = succ.shape[1], i, j
    cdef int s
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                s = succ[i, j]
                if s >= 0 and mask[s]:
                    o[i] = 1
                    break
    return out


def pred_forall(const int[:, ::1] succ, const unsigned char[::1] mask):
    cdef Py_ssize_t n = succ.shape[0], m = succ.shape[1], i, j
    cdef int s
    out = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                s = succ[i, j]
                if s >= 0 and not mask[s]:
                    o[i] = 0
                    break
    return out
