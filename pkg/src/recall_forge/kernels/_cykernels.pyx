# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Mirrors the signatures of ``pyback`` with typed C loops over contiguous
float64 buffers.  Consumers never import this module directly; the
package-level dispatcher picks it when available.

Matmul loops run k-ascending per output element with a unit-stride inner
loop (transposing an operand into a contiguous scratch buffer where
needed), so the compiler can vectorize without reordering the summation.
"""

import numpy as np

from libc.math cimport sqrt, tanh

NAME = "cython"


def matmul_nn(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], inner = a.shape[1], n = b.shape[1]
    out_arr = np.zeros((m, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double aik
    for i in range(m):
        for k in range(inner):
            aik = a[i, k]
            for j in range(n):
                out[i, j] += aik * b[k, j]
    return out_arr


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    return matmul_nn(a, np.ascontiguousarray(np.asarray(b).T))


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t inner = a.shape[0], m = a.shape[1], n = b.shape[1]
    out_arr = np.zeros((m, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double aki
    for k in range(inner):
        for i in range(m):
            aki = a[k, i]
            for j in range(n):
                out[i, j] += aki * b[k, j]
    return out_arr


def tower_forward(double[:, ::1] x, list weights, list biases):
    cdef list acts = []
    cdef double[:, ::1] h = x
    cdef double[:, ::1] wt, out
    cdef double[::1] b
    cdef Py_ssize_t layer_count = len(weights)
    cdef Py_ssize_t k, i, j, c, rows, cols, inner
    cdef double hic
    cdef bint hidden
    for k in range(layer_count):
        # weights are stored (out, in); work on a contiguous transpose
        wt = np.ascontiguousarray(np.asarray(weights[k]).T)
        b = biases[k]
        rows = h.shape[0]
        inner = wt.shape[0]
        cols = wt.shape[1]
        out_arr = np.empty((rows, cols))
        out = out_arr
        hidden = k < layer_count - 1
        for i in range(rows):
            for j in range(cols):
                out[i, j] = b[j]
            for c in range(inner):
                hic = h[i, c]
                for j in range(cols):
                    out[i, j] += hic * wt[c, j]
            if hidden:
                for j in range(cols):
                    out[i, j] = tanh(out[i, j])
        acts.append(out_arr)
        h = out
    return acts


def tower_backward(double[:, ::1] x, list weights, list acts, d_out):
    cdef Py_ssize_t layer_count = len(weights)
    cdef list d_weights = [None] * layer_count
    cdef list d_biases = [None] * layer_count
    cdef double[:, ::1] delta, inp, act, dprev
    cdef double[::1] db
    cdef Py_ssize_t k, i, j, rows, cols
    delta_arr = d_out
    for k in range(layer_count - 1, -1, -1):
        delta = delta_arr
        inp = acts[k - 1] if k > 0 else x
        d_weights[k] = matmul_tn(delta, inp)
        rows = delta.shape[0]
        cols = delta.shape[1]
        db_arr = np.zeros(cols)
        db = db_arr
        for i in range(rows):
            for j in range(cols):
                db[j] += delta[i, j]
        d_biases[k] = db_arr
        if k > 0:
            # acts[k-1] holds tanh output, so tanh' = 1 - act^2
            dprev_arr = matmul_nn(delta_arr, weights[k])
            dprev = dprev_arr
            act = acts[k - 1]
            rows = dprev.shape[0]
            cols = dprev.shape[1]
            for i in range(rows):
                for j in range(cols):
                    dprev[i, j] *= 1.0 - act[i, j] * act[i, j]
            delta_arr = dprev_arr
    return d_weights, d_biases


def normalize_rows(double[:, ::1] z):
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1]
    out_arr = np.empty((rows, cols))
    norms_arr = np.empty(rows)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] norms = norms_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            s += z[i, j] * z[i, j]
        s = sqrt(s)
        norms[i] = s
        for j in range(cols):
            out[i, j] = z[i, j] / s
    return out_arr, norms_arr


def normalize_rows_backward(double[:, ::1] zhat, double[::1] norms,
                            double[:, ::1] d_zhat):
    cdef Py_ssize_t rows = zhat.shape[0], cols = zhat.shape[1]
    out_arr = np.empty((rows, cols))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double proj
    for i in range(rows):
        proj = 0.0
        for j in range(cols):
            proj += zhat[i, j] * d_zhat[i, j]
        for j in range(cols):
            out[i, j] = (d_zhat[i, j] - zhat[i, j] * proj) / norms[i]
    return out_arr
