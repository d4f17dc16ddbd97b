"""Second-order global descriptors for visual place recognition.

Training-free aggregation of patch features into unit-norm descriptors
via covariance statistics on the SPD manifold, plus SPD distance
metrics, a retrieval evaluator, and an invariance laboratory.
"""

__version__ = "0.1.0"

from ria.aggregation import (
    PipelineConfig,
    aggregate,
    aggregate_baseline,
    compute_descriptor,
    isometric_vectorize,
    newton_schulz_sqrt,
    project,
    rectify,
    regularize,
    sample_covariance,
)
from ria.backend import HAVE_COMPILED
from ria.linalg import (
    frobenius_norm,
    matrix_function,
    random_orthonormal_basis,
    sym_eig,
)
from ria.metrics import MetricSpec, descriptor_similarity, spd_distance
from ria.retrieval import build_index, evaluate_recall, search

__all__ = [
    "__version__",
    "HAVE_COMPILED",
    "PipelineConfig",
    "aggregate",
    "aggregate_baseline",
    "compute_descriptor",
    "isometric_vectorize",
    "newton_schulz_sqrt",
    "project",
    "rectify",
    "regularize",
    "sample_covariance",
    "frobenius_norm",
    "matrix_function",
    "random_orthonormal_basis",
    "sym_eig",
    "MetricSpec",
    "descriptor_similarity",
    "spd_distance",
    "build_index",
    "evaluate_recall",
    "search",
]
