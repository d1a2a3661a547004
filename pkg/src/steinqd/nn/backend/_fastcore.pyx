# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled MLP kernels: BLAS matmuls, C loops for bias/backward bookkeeping,
numpy SIMD ufuncs for the transcendental pieces.

Semantics must match py_backend exactly; the test suite cross-checks both.
"""

import numpy as np

from libc.math cimport exp as c_exp
from scipy.linalg.cython_blas cimport dgemm

NAME = "compiled"

HEAD_IDENTITY = 0
HEAD_EXP = 1
HEAD_SOFTMAX = 2

cdef double EXP_CLAMP = 30.0


cdef void _gemm_nn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept nogil:
    # row-major c[M,N] = a[M,K] @ b[K,N]
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, &b[0, 0], &n, &a[0, 0], &k, &zero, &c[0, 0], &n)


cdef void _gemm_tn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept nogil:
    # row-major c[D,N] = a[M,D]^T @ b[M,N]
    cdef int m = a.shape[0], d = a.shape[1], n = b.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &d, &m, &one, &b[0, 0], &n, &a[0, 0], &d, &zero, &c[0, 0], &n)


cdef void _gemm_nt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept nogil:
    # row-major c[M,D] = a[M,N] @ b[D,N]^T
    cdef int m = a.shape[0], n = a.shape[1], d = b.shape[0]
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &d, &m, &n, &one, &b[0, 0], &n, &a[0, 0], &n, &zero, &c[0, 0], &d)


cdef void _add_bias(double[:, ::1] pre, double[::1] bias) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(pre.shape[0]):
        for j in range(pre.shape[1]):
            pre[i, j] += bias[j]


cdef void _softmax_rows(double[:, ::1] z, double[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(z.shape[0]):
        m = z[i, 0]
        for j in range(1, z.shape[1]):
            if z[i, j] > m:
                m = z[i, j]
        s = 0.0
        for j in range(z.shape[1]):
            y[i, j] = c_exp(z[i, j] - m)
            s += y[i, j]
        for j in range(z.shape[1]):
            y[i, j] /= s


def mlp_forward(ws, bs, x, int head):
    y, _ = mlp_forward_cache(ws, bs, x, head)
    return y


def mlp_forward_cache(ws, bs, x, int head):
    cdef Py_ssize_t n_layers = len(ws)
    cdef Py_ssize_t k
    h = np.ascontiguousarray(x, dtype=np.float64)
    acts = [h]
    for k in range(n_layers - 1):
        w = ws[k]
        pre = np.empty((h.shape[0], w.shape[1]), dtype=np.float64)
        _gemm_nn(h, w, pre)
        _add_bias(pre, bs[k])
        np.tanh(pre, out=pre)
        acts.append(pre)
        h = pre
    w = ws[n_layers - 1]
    z = np.empty((h.shape[0], w.shape[1]), dtype=np.float64)
    _gemm_nn(h, w, z)
    _add_bias(z, bs[n_layers - 1])
    if head == HEAD_IDENTITY:
        y = z
    elif head == HEAD_EXP:
        y = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
        np.exp(y, out=y)
    else:
        y = np.empty_like(z)
        _softmax_rows(z, y)
    return y, (acts, z)


cdef void _exp_head_backward(double[:, ::1] z, double[:, ::1] y, double[:, ::1] dy,
                             double[:, ::1] dz) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            if -EXP_CLAMP < z[i, j] < EXP_CLAMP:
                dz[i, j] = dy[i, j] * y[i, j]
            else:
                dz[i, j] = 0.0


cdef void _softmax_backward(double[:, ::1] y, double[:, ::1] dy,
                            double[:, ::1] dz) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(y.shape[0]):
        dot = 0.0
        for j in range(y.shape[1]):
            dot += dy[i, j] * y[i, j]
        for j in range(y.shape[1]):
            dz[i, j] = y[i, j] * (dy[i, j] - dot)


cdef void _tanh_grad(double[:, ::1] g, double[:, ::1] act) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            g[i, j] *= 1.0 - act[i, j] * act[i, j]


cdef void _col_sum(double[:, ::1] g, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    for j in range(g.shape[1]):
        out[j] = 0.0
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            out[j] += g[i, j]


def mlp_backward(ws, bs, cache, y, dy, int head):
    acts, z = cache
    cdef Py_ssize_t n_layers = len(ws)
    cdef Py_ssize_t k
    y = np.ascontiguousarray(y, dtype=np.float64)
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    if head == HEAD_IDENTITY:
        dz = dy
    else:
        dz = np.empty_like(dy)
        if head == HEAD_EXP:
            _exp_head_backward(z, y, dy, dz)
        else:
            _softmax_backward(y, dy, dz)

    dws = [None] * n_layers
    dbs = [None] * n_layers
    g = dz
    for k in range(n_layers - 1, -1, -1):
        a_prev = acts[k]
        w = ws[k]
        dw = np.empty_like(w)
        _gemm_tn(a_prev, g, dw)
        db = np.empty(w.shape[1], dtype=np.float64)
        _col_sum(g, db)
        dws[k] = dw
        dbs[k] = db
        g_prev = np.empty((g.shape[0], w.shape[0]), dtype=np.float64)
        _gemm_nt(g, w, g_prev)
        if k > 0:
            _tanh_grad(g_prev, a_prev)
        g = g_prev
    return dws, dbs, g
