# cython: boundscheck=False, wraparound=False, cdivision=True
"""Native implementation of the hot kernels.

_reference.py is the authoritative definition of the behavior.

The per-element arithmetic follows _reference.chambolle_sweep exactly so
both backends agree to floating-point roundoff.
"""

import numpy as np

from libc.math cimport sqrt


def chambolle_sweep(double[:, ::1] r, double beta, double step, int iters,
                    double[:, ::1] pv, double[:, ::1] ph):
    """Run ``iters`` dual total-variation sweeps; mirrors the reference kernel."""
    cdef Py_ssize_t H = r.shape[0]
    cdef Py_ssize_t W = r.shape[1]
    cdef Py_ssize_t i, j, iu, jl, idn, jrt
    cdef int it
    cdef double gv, gh, mag, wc
    rb_arr = np.empty((H, W), dtype=np.float64)
    w_arr = np.empty((H, W), dtype=np.float64)
    out_arr = np.empty((H, W), dtype=np.float64)
    cdef double[:, ::1] rb = rb_arr
    cdef double[:, ::1] w = w_arr
    cdef double[:, ::1] out = out_arr

    for i in range(H):
        for j in range(W):
            rb[i, j] = r[i, j] / beta

    for it in range(iters):
        for i in range(H):
            iu = i - 1 if i > 0 else H - 1
            for j in range(W):
                jl = j - 1 if j > 0 else W - 1
                w[i, j] = (pv[i, j] - pv[iu, j]) + (ph[i, j] - ph[i, jl]) + rb[i, j]
        for i in range(H):
            idn = i + 1 if i + 1 < H else 0
            for j in range(W):
                jrt = j + 1 if j + 1 < W else 0
                wc = w[i, j]
                gv = w[idn, j] - wc
                gh = w[i, jrt] - wc
                mag = sqrt(gv * gv + gh * gh)
                pv[i, j] = (pv[i, j] + step * gv) / (1.0 + step * mag)
                ph[i, j] = (ph[i, j] + step * gh) / (1.0 + step * mag)

    for i in range(H):
        iu = i - 1 if i > 0 else H - 1
        for j in range(W):
            jl = j - 1 if j > 0 else W - 1
            out[i, j] = beta * ((pv[i, j] - pv[iu, j]) + (ph[i, j] - ph[i, jl]) + rb[i, j])
    return out_arr
