"""Distances between SPD matrices and between vectorized descriptors.

Power-Euclidean at arbitrary alpha in (0, 1], Log-Euclidean, and flat
Euclidean. The matrix log and fractional powers always go through the
eigendecomposition oracle; the 1/alpha prefactor of the power metric is
kept even though it cancels in rankings.
"""

from dataclasses import dataclass

import numpy as np

from ria import linalg
from ria.errors import ConfigError, DimensionError, InvalidInputError

METRIC_KINDS = ("pem", "log_euclidean", "euclidean")


@dataclass(frozen=True)
class MetricSpec:
    """Which SPD distance to use; alpha only matters for kind='pem'."""

    kind: str = "pem"
    alpha: float = 0.5

    def validated(self):
        if self.kind not in METRIC_KINDS:
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if self.kind == "pem" and not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"pem alpha must be in (0, 1], got {self.alpha}")
        return self


def spd_distance(a, b, spec=MetricSpec()):
    """Distance between two SPD matrices under the given metric.

    pem: (1/alpha) ||A^alpha - B^alpha||_F
    log_euclidean: ||log A - log B||_F
    euclidean: ||A - B||_F
    """
    spec.validated()
    a = linalg.symmetrize(a)
    b = linalg.symmetrize(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if spec.kind == "euclidean":
        return linalg.frobenius_norm(a - b)
    if spec.kind == "log_euclidean":
        return linalg.frobenius_norm(linalg.spd_log(a) - linalg.spd_log(b))
    if spec.alpha == 1.0:
        return linalg.frobenius_norm(a - b)
    pa = linalg.matrix_function(a, "power", spec.alpha)
    pb = linalg.matrix_function(b, "power", spec.alpha)
    return linalg.frobenius_norm(pa - pb) / spec.alpha


def descriptor_similarity(a, b, norm_tol=1e-6):
    """Dot product of two unit-norm descriptors (cosine similarity)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"descriptor shape mismatch: {a.shape} vs {b.shape}")
    for name, v in (("a", a), ("b", b)):
        if abs(np.linalg.norm(v) - 1.0) > norm_tol:
            raise InvalidInputError(f"descriptor {name} is not unit-norm")
    return float(a @ b)


def descriptor_distance(a, b):
    """Euclidean distance between two descriptors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"descriptor shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))
