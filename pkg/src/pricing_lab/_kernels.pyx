# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled optimistic-argmax kernel.

Same contract as _kernels_py.ucb_argmax: for each feature column compute
min over ellipsoids of center'c + radius * ||c||_{shape^{-1}} (plain norm
for balls), then return the first argmax. The triangular solve is a
hand-rolled forward substitution per ellipsoid across all columns.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def ucb_argmax(double[:, ::1] cols, double[:, ::1] centers,
               double[:, :, ::1] chols, double[::1] radii,
               unsigned char[::1] is_ball):
    cdef Py_ssize_t d = cols.shape[0]
    cdef Py_ssize_t g = cols.shape[1]
    cdef Py_ssize_t ne = centers.shape[0]
    cdef cnp.ndarray[double, ndim=1] best_arr = np.empty(g, dtype=np.float64)
    cdef double[::1] best = best_arr
    cdef cnp.ndarray[double, ndim=2] z_arr = np.empty((d, g), dtype=np.float64)
    cdef double[:, ::1] z = z_arr
    cdef Py_ssize_t e, i, j, k
    cdef double acc, s, val, r, bv
    cdef Py_ssize_t idx

    for j in range(g):
        best[j] = 0.0
    for e in range(ne):
        r = radii[e]
        if is_ball[e]:
            for j in range(g):
                z[0, j] = 0.0
            for i in range(d):
                for j in range(g):
                    z[0, j] += cols[i, j] * cols[i, j]
            for j in range(g):
                z[0, j] = sqrt(z[0, j])
        else:
            # forward substitution L z = cols, then column norms into z[0]
            for i in range(d):
                for j in range(g):
                    acc = cols[i, j]
                    for k in range(i):
                        acc -= chols[e, i, k] * z[k, j]
                    z[i, j] = acc / chols[e, i, i]
            for j in range(g):
                s = 0.0
                for i in range(d):
                    s += z[i, j] * z[i, j]
                z[0, j] = sqrt(s)
        for j in range(g):
            val = r * z[0, j]
            for i in range(d):
                val += centers[e, i] * cols[i, j]
            if e == 0 or val < best[j]:
                best[j] = val
    idx = 0
    bv = best[0]
    for j in range(1, g):
        if best[j] > bv:
            bv = best[j]
            idx = j
    return idx, bv
