"""Fused graph-network kernels; same contracts as ``_gnn_ops_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

backend = "cython"


def bias_relu(double[:, ::1] z, double[::1] b):
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1], i, j
    h_arr = np.empty((n, d))
    m_arr = np.empty((n, d), dtype=np.bool_)
    cdef double[:, ::1] h = h_arr
    cdef cnp.npy_bool[:, ::1] m = m_arr
    cdef double a
    for i in range(n):
        for j in range(d):
            a = z[i, j] + b[j]
            if a > 0:
                h[i, j] = a
                m[i, j] = 1
            else:
                h[i, j] = 0.0
                m[i, j] = 0
    return h_arr, m_arr


def bias_relu_ln(double[:, ::1] z, double[::1] b, double[::1] g, double[::1] beta, double eps):
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1], i, j
    y_arr = np.empty((n, d))
    x_arr = np.empty((n, d))
    inv_arr = np.empty(n)
    m_arr = np.empty((n, d), dtype=np.bool_)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] xh = x_arr
    cdef double[::1] inv = inv_arr
    cdef cnp.npy_bool[:, ::1] m = m_arr
    cdef double a, s, mu, c, ss, iv
    for i in range(n):
        s = 0.0
        for j in range(d):
            a = z[i, j] + b[j]
            if a > 0:
                m[i, j] = 1
            else:
                a = 0.0
                m[i, j] = 0
            xh[i, j] = a
            s += a
        mu = s / d
        ss = 0.0
        for j in range(d):
            c = xh[i, j] - mu
            xh[i, j] = c
            ss += c * c
        iv = 1.0 / sqrt(ss / d + eps)
        inv[i] = iv
        for j in range(d):
            c = xh[i, j] * iv
            xh[i, j] = c
            y[i, j] = c * g[j] + beta[j]
    return y_arr, x_arr, inv_arr, m_arr


def ln_relu_bwd(double[:, ::1] dy, double[::1] g, double[:, ::1] xhat, double[::1] inv,
                cnp.npy_bool[:, ::1] mask, double[::1] dg, double[::1] dbeta):
    cdef Py_ssize_t n = dy.shape[0], d = dy.shape[1], i, j
    dz_arr = np.empty((n, d))
    cdef double[:, ::1] dz = dz_arr
    cdef double s1, s2, dxh, m1, m2, v
    for i in range(n):
        s1 = 0.0
        s2 = 0.0
        for j in range(d):
            v = dy[i, j]
            dg[j] += v * xhat[i, j]
            dbeta[j] += v
            dxh = v * g[j]
            s1 += dxh
            s2 += dxh * xhat[i, j]
        m1 = s1 / d
        m2 = s2 / d
        for j in range(d):
            if mask[i, j]:
                dz[i, j] = inv[i] * (dy[i, j] * g[j] - m1 - xhat[i, j] * m2)
            else:
                dz[i, j] = 0.0
    return dz_arr
