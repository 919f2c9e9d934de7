# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel.

Performs exactly the same floating-point operations in the same order as
the numpy reference kernel (``_step_py.py``), so both backends yield
bit-identical trajectories from the same random inputs.
"""
import numpy as np
from libc.math cimport sqrt

BACKEND = "cython"

cdef double GAP_FLOOR = 1e-14  # must match _step_py.GAP_FLOOR


def step_positions(double[::1] x, double[::1] delta, double[::1] bterm,
                   double[::1] f_left, double[::1] f_right, double[::1] ell,
                   int max_passes):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k, nxt, prv
    cdef int passes = 0
    cdef double u0k, ufk, d, m, g
    cdef bint any_bad

    if n == 1:
        x[0] = x[0] + delta[0]
        ell[0] = 0.0
        return 0

    u0_arr = np.empty(n)
    uf_arr = np.empty(n)
    g_arr = np.empty(n)
    cdef double[::1] u0 = u0_arr
    cdef double[::1] uf = uf_arr
    cdef double[::1] gv = g_arr

    for k in range(n):
        nxt = k + 1 if k + 1 < n else 0
        if k < n - 1:
            u0k = x[k + 1] - x[k]
        else:
            u0k = x[0] + 1.0 - x[n - 1]
        ufk = u0k + (delta[nxt] - delta[k])
        u0[k] = u0k
        uf[k] = ufk
        d = u0k - ufk
        m = 0.5 * ((u0k + ufk) - sqrt(d * d + bterm[k]))
        ell[k] = -m if m < 0.0 else 0.0

    while True:
        any_bad = False
        for k in range(n):
            nxt = k + 1 if k + 1 < n else 0
            prv = k - 1 if k > 0 else n - 1
            g = uf[k] + ell[k]
            g = g - f_left[nxt] * ell[nxt]
            g = g - f_right[prv] * ell[prv]
            gv[k] = g
            if g < 0.0:
                any_bad = True
        if not any_bad:
            break
        passes += 1
        if passes > max_passes:
            return -1
        for k in range(n):
            if gv[k] < 0.0:
                ell[k] = (ell[k] - gv[k]) + GAP_FLOOR

    for k in range(n):
        prv = k - 1 if k > 0 else n - 1
        x[k] = ((x[k] + delta[k]) - f_left[k] * ell[k]) + f_right[prv] * ell[prv]
    return passes
