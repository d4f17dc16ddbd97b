"""Dense symmetric-matrix linear algebra.

Symmetric eigendecomposition (cyclic Jacobi, compiled kernel with numpy
fallback), spectral matrix functions, and seeded orthonormal-basis
generation. Everything here is a pure function on plain float64 arrays;
matrices are symmetrized on entry with (A + A^T) / 2.
"""

from dataclasses import dataclass

import numpy as np

from ria.backend import jacobi_eigh
from ria.errors import DimensionError, InvalidInputError, SingularMatrixError

# relative eigenvalue floor for log and fractional powers; below it we
# raise instead of clamping, so rank collapse upstream stays visible
EIG_FLOOR = 1e-14


def symmetrize(m):
    """Return (M + M^T) / 2 as a float64 array, validating shape and finiteness."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionError("matrix dimension must be >= 1")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return (a + a.T) / 2.0


def frobenius_norm(m):
    """sqrt of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(m, dtype=np.float64)))


@dataclass(frozen=True)
class EigenSystem:
    """Spectral factorization M = V diag(w) V^T, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def sym_eig(m, tol=1e-12, max_sweeps=30):
    """Symmetric eigendecomposition via cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass is below
    tol * ||M||_F (or after max_sweeps sweeps).
    """
    a = symmetrize(m)
    w, v = jacobi_eigh(a, tol, max_sweeps)
    order = np.argsort(-w, kind="stable")
    return EigenSystem(np.ascontiguousarray(w[order]), np.ascontiguousarray(v[:, order]))


def matrix_function(m, kind, alpha=None):
    """Spectral matrix function V f(Lambda) V^T on a symmetric matrix.

    kind is "power" (with exponent alpha) or "log". Log and fractional
    powers require all eigenvalues above EIG_FLOOR * max eigenvalue.
    """
    if kind == "power":
        if alpha is None:
            raise InvalidInputError("power function needs an exponent")
        fn = lambda w: np.power(w, alpha)
        needs_positive = float(alpha) != int(alpha) or alpha < 0
    elif kind == "log":
        fn = np.log
        needs_positive = True
    else:
        raise InvalidInputError(f"unknown matrix function kind: {kind!r}")

    eig = sym_eig(m)
    w = eig.eigenvalues
    if needs_positive:
        floor = EIG_FLOOR * max(float(w[0]), 0.0)
        bad = w <= floor
        if np.any(bad):
            worst = float(w[np.argmax(bad)])
            raise SingularMatrixError(
                f"eigenvalue {worst:.6e} is at or below the positivity floor "
                f"{floor:.6e}; matrix is not safely positive definite for "
                f"{kind}{'' if alpha is None else f'({alpha})'}"
            )
    v = eig.eigenvectors
    return symmetrize((v * fn(w)) @ v.T)


def spd_sqrt_eig(m):
    """Matrix square root through the eigendecomposition (oracle path)."""
    return matrix_function(m, "power", 0.5)


def spd_log(m):
    """Matrix logarithm through the eigendecomposition."""
    return matrix_function(m, "log")


def min_eigenvalue(m):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(sym_eig(m).eigenvalues[-1])


@dataclass(frozen=True)
class ProjectionBasis:
    """Fixed seeded matrix with orthonormal columns, shared by all images."""

    matrix: np.ndarray
    seed: int

    @property
    def dim_in(self):
        return self.matrix.shape[0]

    @property
    def dim_out(self):
        return self.matrix.shape[1]


def _mgs_orthonormalize(m):
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    q = np.array(m, dtype=np.float64, copy=True, order="F")
    cols = q.shape[1]
    for j in range(cols):
        for _pass in range(2):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm < 1e-300:
            raise InvalidInputError(f"column {j} degenerated during orthonormalization")
        q[:, j] /= norm
    return np.ascontiguousarray(q)


def random_orthonormal_basis(rows, cols, seed):
    """Seeded basis with orthonormal columns (rows x cols, cols <= rows).

    Entries come from a Philox counter-based generator, so identical
    seeds give bit-identical matrices across platforms; columns are
    orthonormalized with modified Gram-Schmidt.
    """
    if cols > rows:
        raise DimensionError(f"cannot build {cols} orthonormal columns in R^{rows}")
    if cols < 1 or rows < 1:
        raise DimensionError("rows and cols must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    raw = rng.standard_normal((rows, cols))
    return ProjectionBasis(matrix=_mgs_orthonormalize(raw), seed=int(seed))


def random_orthogonal(dim, seed):
    """Square orthogonal matrix, seeded (convenience over the basis generator)."""
    return random_orthonormal_basis(dim, dim, seed).matrix


def random_spd(dim, seed, cond=10.0, scale=1.0):
    """Random SPD matrix with log-uniform spectrum in [scale/cond, scale] * ... .

    Eigenvalues are log-uniform between scale and scale * cond, so the
    condition number is at most cond. Used by tests and the invariance lab.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    w = np.exp(rng.uniform(0.0, np.log(cond), size=dim)) * scale
    q = random_orthogonal(dim, seed + 1)
    return symmetrize((q * w) @ q.T)
