# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cyclic Jacobi eigendecomposition of a dense symmetric matrix.

Compiled hot kernel; ria._jacobi_py holds the equivalent pure-numpy
implementation selected when this extension is not built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def jacobi_eigh(object m, double tol=1e-12, int max_sweeps=30):
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Sweeps terminate when the off-diagonal Frobenius mass drops below
    tol * ||M||_F, or after max_sweeps full sweeps.

    Returns (eigenvalues, eigenvectors) with eigenvectors as columns,
    unsorted (callers sort).
    """
    a_arr = np.array(m, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t d = a_arr.shape[0]
    v_arr = np.eye(d, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr

    cdef double fro = 0.0
    cdef Py_ssize_t i, j, k, p, q
    for i in range(d):
        for j in range(d):
            fro += a[i, j] * a[i, j]
    fro = sqrt(fro)
    if fro == 0.0:
        return np.diagonal(a_arr).copy(), v_arr

    # rotations on entries below skip_tol cannot push the off-diagonal
    # mass above the convergence threshold
    cdef double skip_tol = tol * fro / (d * d + 1.0)
    cdef double off, apq, tau, t, c, s, x, y
    cdef int sweep

    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(d):
            for j in range(i + 1, d):
                off += 2.0 * a[i, j] * a[i, j]
        if sqrt(off) <= tol * fro:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if fabs(apq) <= skip_tol:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - sqrt(1.0 + tau * tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                for k in range(d):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * y
                    a[k, q] = s * x + c * y
                for k in range(d):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * y
                    a[q, k] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(d):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * y
                    v[k, q] = s * x + c * y

    return np.diagonal(a_arr).copy(), v_arr
