# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory kernels for the built-in analytic problems.

Mirrors ``_kernels_py`` operation for operation; the two must stay
bit-identical since callers may select either at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, pow

IS_COMPILED = True


cdef double _objective(int code, const double* x, Py_ssize_t d) noexcept nogil:
    cdef double total, term, sq, diff, u
    cdef Py_ssize_t i
    if code == 0:
        sq = x[0] * x[0]
        return sq * sq
    if code == 1:
        return 0.001 * (x[0] * x[0])
    if code == 2:
        term = x[1] - x[0] * x[0]
        u = x[0] - 1.0
        return 100.0 * (term * term) + u * u
    if code == 3:
        total = 0.0
        for i in range(0, 64, 2):
            diff = x[i + 1] - x[i]
            u = 1.0 - x[i]
            term = 10.0 * (diff * diff) + u * u
            sq = term * term
            total += sq * sq
        return total
    if code == 4:
        total = 0.0
        for i in range(d):
            total += x[i] * x[i]
        return 0.5 * total
    return -1.0


def kwsa_trajectory(int code, double x0, double lo, double hi,
                    double theta_a, double theta_c, double sigma,
                    Py_ssize_t iters, double[:, ::1] normals):
    """See ``_kernels_py.kwsa_trajectory``."""
    xs_arr = np.empty(iters + 1)
    cdef double[::1] xs = xs_arr
    cdef double x = x0, a_k, h_k, fp, fm, x_new, point
    cdef Py_ssize_t k, committed = 0, attempted = 0
    xs[0] = x0
    with nogil:
        for k in range(1, iters + 1):
            a_k = theta_a / k
            h_k = theta_c / pow(k, 0.25)
            point = x + h_k
            fp = _objective(code, &point, 1) + sigma * normals[k - 1, 0]
            point = x - h_k
            fm = _objective(code, &point, 1) + sigma * normals[k - 1, 1]
            attempted = k
            x_new = x - a_k * (fp - fm) / (2.0 * h_k)
            if x_new < lo:
                x_new = lo
            elif x_new > hi:
                x_new = hi
            if not isfinite(x_new):
                break
            x = x_new
            xs[k] = x
            committed = k
    return xs_arr[:committed + 1], committed, attempted


def spsa_trajectory(int code, double[::1] x0, double[::1] lo, double[::1] hi,
                    double theta_a, double theta_c, double sigma,
                    Py_ssize_t iters, double[:, ::1] normals,
                    double[:, ::1] deltas, bint record):
    """See ``_kernels_py.spsa_trajectory``."""
    cdef Py_ssize_t d = x0.shape[0]
    x_arr = np.array(x0, dtype=float)
    cdef double[::1] x = x_arr
    xs_arr = np.empty((iters + 1, d)) if record else None
    cdef double[:, ::1] xs = xs_arr if record else None
    scratch_arr = np.empty(d)
    cdef double[::1] scratch = scratch_arr
    minus_arr = np.empty(d)
    cdef double[::1] y_minus = minus_arr
    cdef double a_k, c_k, fp, fm, diff, x_new
    cdef Py_ssize_t k, i, committed = 0, attempted = 0
    cdef bint ok

    if record:
        for i in range(d):
            xs[0, i] = x[i]
    with nogil:
        for k in range(1, iters + 1):
            a_k = theta_a / pow(k + 50.0, 0.602)
            c_k = theta_c / pow(k, 0.101)
            for i in range(d):
                scratch[i] = x[i] + c_k * deltas[k - 1, i]
                y_minus[i] = x[i] - c_k * deltas[k - 1, i]
            fp = _objective(code, &scratch[0], d) + sigma * normals[k - 1, 0]
            fm = _objective(code, &y_minus[0], d) + sigma * normals[k - 1, 1]
            attempted = k
            diff = (fp - fm) / (2.0 * c_k)
            ok = True
            for i in range(d):
                x_new = x[i] - a_k * diff / deltas[k - 1, i]
                if x_new < lo[i]:
                    x_new = lo[i]
                elif x_new > hi[i]:
                    x_new = hi[i]
                if not isfinite(x_new):
                    ok = False
                    break
                scratch[i] = x_new
            if not ok:
                break
            for i in range(d):
                x[i] = scratch[i]
            if record:
                for i in range(d):
                    xs[k, i] = x[i]
            committed = k
    if record:
        return xs_arr[:committed + 1], committed, attempted
    return x_arr.copy(), committed, attempted
