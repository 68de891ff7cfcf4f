# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops mirroring the numpy versions in kernels.py."""
import numpy as np
from libc.math cimport sqrt


def leapfrog_record(double[:, ::1] coef, double[:, ::1] damp,
                    long[::1] inj_ix, long[::1] inj_iy, long[::1] inj_src, double[::1] inj_w,
                    double[:, ::1] src_wave, long[::1] rec_ix, long[::1] rec_iy):
    cdef Py_ssize_t nx = coef.shape[0], ny = coef.shape[1]
    cdef Py_ssize_t nsteps = src_wave.shape[1], ninj = inj_ix.shape[0]
    cdef Py_ssize_t nrx = rec_ix.shape[0], nry = rec_iy.shape[0]
    cdef Py_ssize_t n, i, j, s
    cdef double lap, a, b
    prev_arr = np.zeros((nx, ny))
    cur_arr = np.zeros((nx, ny))
    nxt_arr = np.zeros((nx, ny))
    out_arr = np.empty((nsteps, nrx, nry))
    cdef double[:, ::1] prev = prev_arr
    cdef double[:, ::1] cur = cur_arr
    cdef double[:, ::1] nxt = nxt_arr
    cdef double[:, ::1] tmp
    cdef double[:, :, ::1] out = out_arr
    for n in range(nsteps):
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                lap = cur[i + 1, j] + cur[i - 1, j]
                lap = lap + cur[i, j + 1]
                lap = lap + cur[i, j - 1]
                lap = lap - 4.0 * cur[i, j]
                a = 1.0 / (1.0 + damp[i, j])
                b = 1.0 - damp[i, j]
                nxt[i, j] = (2.0 * cur[i, j] - b * prev[i, j] + coef[i, j] * lap) * a
        for s in range(ninj):
            nxt[inj_ix[s], inj_iy[s]] += inj_w[s] * src_wave[inj_src[s], n]
        tmp = prev
        prev = cur
        cur = nxt
        nxt = tmp
        for i in range(nrx):
            for j in range(nry):
                out[n, i, j] = cur[rec_ix[i], rec_iy[j]]
    return out_arr


def ncc_scan(double[:, :, ::1] traces, double[:, ::1] ref, long K):
    cdef Py_ssize_t P = traces.shape[0], C = traces.shape[1], T = traces.shape[2]
    cdef Py_ssize_t p, c, t, lo, hi, ki, nk = 2 * K + 1
    cdef long k
    cdef double num, eu, x
    cdef double *u
    cdef double *r
    rho_arr = np.zeros((P, nk))
    cdef double[:, ::1] rho = rho_arr
    # the reference energy of each lag window does not depend on the trace
    er_arr = np.zeros(nk)
    cdef double[::1] er = er_arr
    for ki in range(nk):
        k = ki - K
        lo = -k if k < 0 else 0
        hi = T - k if k >= 0 else T
        for c in range(C):
            for t in range(lo, hi):
                er[ki] += ref[c, t] * ref[c, t]
    for p in range(P):
        for ki in range(nk):
            k = ki - K
            lo = -k if k < 0 else 0
            hi = T - k if k >= 0 else T
            num = 0.0
            eu = 0.0
            for c in range(C):
                u = &traces[p, c, 0]
                r = &ref[c, 0]
                for t in range(lo, hi):
                    x = u[t + k]
                    num += x * r[t]
                    eu += x * x
            if er[ki] > 0.0 and eu > 0.0:
                rho[p, ki] = num / sqrt(er[ki] * eu)
    return rho_arr
