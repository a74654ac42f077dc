# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation stencils: five-point Laplacian and exclude-center
neighborhood mean. Accumulation order per pixel matches the numpy
fallback so the two backends agree bitwise."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def laplacian(double[:, ::1] field):
    cdef Py_ssize_t n = field.shape[0]
    cdef Py_ssize_t m = field.shape[1]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, iu, id_, jl, jr
    for i in range(n):
        iu = i - 1 if i > 0 else 0
        id_ = i + 1 if i < n - 1 else n - 1
        for j in range(m):
            jl = j - 1 if j > 0 else 0
            jr = j + 1 if j < m - 1 else m - 1
            out[i, j] = ((field[iu, j] + field[id_, j]) + field[i, jl]) \
                + field[i, jr] - 4.0 * field[i, j]
    return out_arr


def neighborhood_mean(double[:, ::1] field, Py_ssize_t radius):
    cdef Py_ssize_t n = field.shape[0]
    cdef Py_ssize_t m = field.shape[1]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, di, dj, ii, jj
    cdef double acc, cnt
    for i in range(n):
        for j in range(m):
            acc = 0.0
            cnt = 0.0
            for di in range(-radius, radius + 1):
                ii = i + di
                if ii < 0 or ii >= n:
                    continue
                for dj in range(-radius, radius + 1):
                    if di == 0 and dj == 0:
                        continue
                    jj = j + dj
                    if jj < 0 or jj >= m:
                        continue
                    acc += field[ii, jj]
                    cnt += 1.0
            out[i, j] = acc / cnt
    return out_arr
