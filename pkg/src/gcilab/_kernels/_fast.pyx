# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: cyclic Jacobi eigensolver and direct convolution."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

BACKEND = "cython"


def jacobi_eigh(a_in, double tol_scale=1e-12, int max_sweeps=100):
    """Cyclic Jacobi eigensolver; same contract as the numpy reference."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.array(a_in, dtype=np.float64)
    cdef int n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v = np.eye(n)
    if n == 1:
        return a[0, :1].copy(), v
    cdef double fro = 0.0, off
    cdef int i, j, p, q, sweep
    for i in range(n):
        for j in range(n):
            fro += a[i, j] * a[i, j]
    cdef double thresh = tol_scale * sqrt(fro)
    if thresh <= 0.0:
        thresh = tol_scale * 2.2250738585072014e-308
    cdef double apq, theta, t, c, s, rp, rq
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if sqrt(off) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= thresh / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    rp = a[p, i]
                    rq = a[q, i]
                    a[p, i] = c * rp - s * rq
                    a[q, i] = s * rp + c * rq
                for i in range(n):
                    rp = a[i, p]
                    rq = a[i, q]
                    a[i, p] = c * rp - s * rq
                    a[i, q] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    rp = v[i, p]
                    v[i, p] = c * rp - s * v[i, q]
                    v[i, q] = s * rp + c * v[i, q]
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], np.asarray(v)[:, order]


def convolve_direct(f_in, g_in):
    """Full discrete convolution by direct summation."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.ascontiguousarray(f_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef int nf = f.shape[0], ng = g.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(nf + ng - 1)
    cdef int i, j
    cdef double fi
    for i in range(nf):
        fi = f[i]
        if fi == 0.0:
            continue
        for j in range(ng):
            out[i + j] += fi * g[j]
    return out
