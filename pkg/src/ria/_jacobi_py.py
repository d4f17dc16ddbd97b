"""Pure-numpy fallback for the cyclic Jacobi eigensolver.

Mirrors ria._jacobi exactly; rotation updates are vectorized per plane
but the sweep loop runs in Python, so this is an order of magnitude
slower than the compiled kernel (see benchmarks/bench_eig.py).
"""

import math

import numpy as np


def jacobi_eigh(m, tol=1e-12, max_sweeps=30):
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors as columns,
    unsorted (callers sort).
    """
    a = np.array(m, dtype=np.float64, order="C", copy=True)
    d = a.shape[0]
    v = np.eye(d)

    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return np.diagonal(a).copy(), v

    skip_tol = tol * fro / (d * d + 1.0)

    for _sweep in range(max_sweeps):
        off = math.sqrt(max(np.sum(a * a) - np.sum(np.diagonal(a) ** 2), 0.0))
        if off <= tol * fro:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= skip_tol:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    return np.diagonal(a).copy(), v
