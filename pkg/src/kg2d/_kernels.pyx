# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics match ``kg2d._kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def cubic_kick(double[:, ::1] ut, const double[:, ::1] u, double coef):
    """In place ``ut -= coef * u**3``."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1]
    cdef double a
    for i in range(n0):
        for j in range(n1):
            a = u[i, j]
            ut[i, j] -= coef * a * a * a
    return np.asarray(ut)


def cubic_power(const double[:, ::1] u):
    """Return ``u**3`` as a new array."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1]
    out = np.empty((n0, n1), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double a
    for i in range(n0):
        for j in range(n1):
            a = u[i, j]
            o[i, j] = a * a * a
    return out


def nonuniform_eval(const double complex[:, ::1] f, const double[::1] x,
                    const double[::1] y, const double[::1] p1,
                    const double[::1] p2, double sign):
    """Evaluate ``sum_jk f[j,k] exp(sign*i*(p1*x[j] + p2*y[k]))`` at each point.

    The inner exponential is built by recurrence along ``y``; the recurrence
    restarts every row so rounding does not accumulate past ``len(y)`` steps.
    """
    cdef Py_ssize_t m = p1.shape[0]
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1]
    cdef Py_ssize_t q, j, k
    cdef double dy, ang
    cdef double complex acc, row, w, step, ex
    out = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] o = out
    dy = y[1] - y[0] if n1 > 1 else 0.0
    for q in range(m):
        acc = 0.0
        ang = sign * p2[q] * dy
        step = cos(ang) + 1j * sin(ang)
        for j in range(n0):
            ang = sign * (p1[q] * x[j] + p2[q] * y[0])
            w = cos(ang) + 1j * sin(ang)
            row = 0.0
            for k in range(n1):
                row = row + f[j, k] * w
                w = w * step
            acc = acc + row
        o[q] = acc
    return out
