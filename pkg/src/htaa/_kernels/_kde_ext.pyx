# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mixture log-density kernel; same contract as ``_kde_py``."""

import numpy as np
from libc.math cimport exp, log, log1p

from htaa._kernels._kde_py import int_contributions

cdef double HALF_LOG_2PI = 0.9189385332046727


def mixture_logpdf(U, P, bw, log_norm, kinds, levels):
    U = np.ascontiguousarray(U, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] u = U
    cdef const double[:, ::1] p = P
    cdef const double[::1] h = np.ascontiguousarray(bw, dtype=np.float64)
    cdef const double[:, ::1] lz = np.ascontiguousarray(log_norm, dtype=np.float64)
    cdef const int[::1] kind = np.ascontiguousarray(kinds, dtype=np.intc)
    cdef const int[::1] lev = np.ascontiguousarray(levels, dtype=np.intc)
    cdef Py_ssize_t m = u.shape[0], d = u.shape[1], n = p.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    acc_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] acc = acc_arr

    # per-column constants
    logh_arr = np.zeros(d, dtype=np.float64)
    same_arr = np.zeros(d, dtype=np.float64)
    diff_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] logh = logh_arr
    cdef double[::1] same_c = same_arr
    cdef double[::1] diff_c = diff_arr
    extra = int_contributions(U, P, bw, log_norm, kinds, levels)
    cdef bint has_extra = extra is not None
    if not has_extra:
        extra = np.zeros((1, 1))
    cdef const double[:, ::1] ic = np.ascontiguousarray(extra, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double s, z, mx, tot
    for k in range(d):
        if kind[k] == 2:
            if lev[k] > 1:
                same_c[k] = log1p(-h[k])
                diff_c[k] = log(h[k] / (lev[k] - 1))
        else:
            logh[k] = log(h[k])

    with nogil:
        for i in range(m):
            mx = -1e308
            for j in range(n):
                s = ic[i, j] if has_extra else 0.0
                for k in range(d):
                    if kind[k] == 0:
                        z = (u[i, k] - p[j, k]) / h[k]
                        s += -0.5 * z * z - logh[k] - HALF_LOG_2PI - lz[j, k]
                    elif kind[k] == 2 and lev[k] > 1:
                        if u[i, k] == p[j, k]:
                            s += same_c[k]
                        else:
                            s += diff_c[k]
                acc[j] = s
                if s > mx:
                    mx = s
            tot = 0.0
            for j in range(n):
                tot += exp(acc[j] - mx)
            out[i] = mx + log(tot) - log(<double>n)
    return out_arr
