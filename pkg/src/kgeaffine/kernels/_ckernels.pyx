# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sparse optimizer updates, gradient scatter-add,
and rank counting. Drop-in replacements for ``_pykernels``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef fused floating:
    float
    double


def scatter_add_rows(floating[:, ::1] dest, const cnp.int64_t[::1] rows,
                     floating[:, ::1] vals):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t d = dest.shape[1]
    cdef Py_ssize_t i, j, r
    for i in range(m):
        r = rows[i]
        for j in range(d):
            dest[r, j] += vals[i, j]


def sgd_update(floating[:, ::1] params, const cnp.int64_t[::1] rows,
               floating[:, ::1] grads, double lr):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t d = params.shape[1]
    cdef Py_ssize_t i, j, r
    cdef floating step = <floating> lr
    for i in range(m):
        r = rows[i]
        for j in range(d):
            params[r, j] -= step * grads[i, j]


def adagrad_update(floating[:, ::1] params, floating[:, ::1] accum,
                   const cnp.int64_t[::1] rows, floating[:, ::1] grads,
                   double lr, double eps):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t d = params.shape[1]
    cdef Py_ssize_t i, j, r
    cdef floating g, a
    cdef floating step = <floating> lr
    cdef floating feps = <floating> eps
    for i in range(m):
        r = rows[i]
        for j in range(d):
            g = grads[i, j]
            a = accum[r, j] + g * g
            accum[r, j] = a
            params[r, j] -= step * g / <floating> sqrt(a + feps)


def rank_counts(floating[::1] scores, double target_score,
                const cnp.uint8_t[::1] mask):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t i
    cdef long greater = 0, ties = 0
    cdef floating t = <floating> target_score
    for i in range(n):
        if mask[i]:
            if scores[i] > t:
                greater += 1
            elif scores[i] == t:
                ties += 1
    return greater, ties
