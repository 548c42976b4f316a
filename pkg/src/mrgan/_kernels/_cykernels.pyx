# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the distance-heavy evaluation paths."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def nn_sqdist_sum(double[:, ::1] a, double[:, ::1] b):
    """Sum over rows of `a` of the min squared euclidean distance to rows of `b`."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double best, acc, diff, total = 0.0
    for i in range(n):
        best = 1e300
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
                if acc >= best:
                    break
            if acc < best:
                best = acc
        total += best
    return total


def min_plane_distance_sum(double[:, ::1] points, double[:, ::1] normals,
                           double[::1] offsets):
    """Sum over points of min over faces of (offset - normal . point)."""
    cdef Py_ssize_t n = points.shape[0], t = normals.shape[0]
    cdef Py_ssize_t i, j
    cdef double best, d, total = 0.0
    for i in range(n):
        best = 1e300
        for j in range(t):
            d = offsets[j] - (normals[j, 0] * points[i, 0]
                              + normals[j, 1] * points[i, 1]
                              + normals[j, 2] * points[i, 2])
            if d < best:
                best = d
        total += best
    return total
