# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-frame hot path.

Single-pass loops over points; semantics match kernels._python exactly
(same quantization arithmetic, same first-seen tie break).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, atan2, sqrt, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


def nearest_anchor_batch(directions, anchor_directions):
    cdef const double[:, ::1] d = np.ascontiguousarray(directions, dtype=np.float64)
    cdef const double[:, ::1] a = np.ascontiguousarray(anchor_directions, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t m = a.shape[0]
    out_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] out = out_arr
    cdef Py_ssize_t i, j, best_j
    cdef double x, y, z, score, best
    for i in range(n):
        x = d[i, 0]
        y = d[i, 1]
        z = d[i, 2]
        best = -2e308
        best_j = 0
        for j in range(m):
            score = x * a[j, 0] + y * a[j, 1] + z * a[j, 2]
            if score > best:
                best = score
                best_j = j
        out[i] = <int> best_j
    return out_arr


cdef inline void _quantize(double x, double y, double z, double norm,
                           Py_ssize_t width, Py_ssize_t height,
                           Py_ssize_t *u, Py_ssize_t *v) noexcept:
    cdef double cz = z / norm
    if cz > 1.0:
        cz = 1.0
    elif cz < -1.0:
        cz = -1.0
    cdef double polar = acos(cz)
    cdef double azimuth = atan2(y, x)
    if azimuth < 0.0:
        azimuth += TWO_PI
    cdef Py_ssize_t uu = <Py_ssize_t> (azimuth * (width / TWO_PI))
    cdef Py_ssize_t vv = <Py_ssize_t> (polar * (height / M_PI))
    if uu < 0:
        uu = 0
    elif uu >= width:
        uu = width - 1
    if vv < 0:
        vv = 0
    elif vv >= height:
        vv = height - 1
    u[0] = uu
    v[0] = vv


def lookup_batch(directions, cells):
    cdef const double[:, ::1] d = np.ascontiguousarray(directions, dtype=np.float64)
    cdef const int[:, ::1] c = np.ascontiguousarray(cells, dtype=np.int32)
    cdef Py_ssize_t height = c.shape[0]
    cdef Py_ssize_t width = c.shape[1]
    cdef Py_ssize_t n = d.shape[0]
    out_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] out = out_arr
    cdef Py_ssize_t i, u, v
    cdef double x, y, z, norm
    for i in range(n):
        x = d[i, 0]
        y = d[i, 1]
        z = d[i, 2]
        norm = sqrt(x * x + y * y + z * z)
        _quantize(x, y, z, norm, width, height, &u, &v)
        out[i] = c[v, u]
    return out_arr


def cull(indices, distances, colors, Py_ssize_t anchor_count):
    cdef const int[::1] idx = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const double[::1] dist = np.ascontiguousarray(distances, dtype=np.float64)
    cdef const double[:, ::1] col = np.ascontiguousarray(colors, dtype=np.float64)
    colors_arr = np.zeros((anchor_count, 3), dtype=np.float64)
    dist_arr = np.zeros(anchor_count, dtype=np.float64)
    init_arr = np.zeros(anchor_count, dtype=np.uint8)
    cdef double[:, ::1] colors_out = colors_arr
    cdef double[::1] dist_out = dist_arr
    cdef cnp.uint8_t[::1] init_out = init_arr
    cdef Py_ssize_t i, a
    for i in range(idx.shape[0]):
        a = idx[i]
        if init_out[a] == 0 or dist[i] < dist_out[a]:
            init_out[a] = 1
            dist_out[a] = dist[i]
            colors_out[a, 0] = col[i, 0]
            colors_out[a, 1] = col[i, 1]
            colors_out[a, 2] = col[i, 2]
    return colors_arr, dist_arr, init_arr.view(bool)


def assign_cull(positions, colors, cells, Py_ssize_t anchor_count):
    cdef const double[:, ::1] p = np.ascontiguousarray(positions, dtype=np.float64)
    cdef const double[:, ::1] col = np.ascontiguousarray(colors, dtype=np.float64)
    cdef const int[:, ::1] c = np.ascontiguousarray(cells, dtype=np.int32)
    cdef Py_ssize_t height = c.shape[0]
    cdef Py_ssize_t width = c.shape[1]
    colors_arr = np.zeros((anchor_count, 3), dtype=np.float64)
    dist_arr = np.zeros(anchor_count, dtype=np.float64)
    init_arr = np.zeros(anchor_count, dtype=np.uint8)
    cdef double[:, ::1] colors_out = colors_arr
    cdef double[::1] dist_out = dist_arr
    cdef cnp.uint8_t[::1] init_out = init_arr
    cdef Py_ssize_t i, u, v, a
    cdef double x, y, z, norm
    for i in range(p.shape[0]):
        x = p[i, 0]
        y = p[i, 1]
        z = p[i, 2]
        norm = sqrt(x * x + y * y + z * z)
        if norm == 0.0:
            continue
        _quantize(x, y, z, norm, width, height, &u, &v)
        a = c[v, u]
        if init_out[a] == 0 or norm < dist_out[a]:
            init_out[a] = 1
            dist_out[a] = norm
            colors_out[a, 0] = col[i, 0]
            colors_out[a, 1] = col[i, 1]
            colors_out[a, 2] = col[i, 2]
    return colors_arr, dist_arr, init_arr.view(bool)
