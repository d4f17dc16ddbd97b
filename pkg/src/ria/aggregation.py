"""Second-order descriptor pipeline.

Projects patch features onto a seeded orthonormal basis, forms the
sample covariance, rectifies and regularizes it into an SPD descriptor,
linearizes via the coupled Newton-Schulz square root (or the eig
oracle), and vectorizes isometrically into a unit-norm global
descriptor. First-order baselines (mean pooling, GeM) live here too.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from ria import linalg
from ria.errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InsufficientSamplesError,
    InvalidInputError,
    PipelineError,
    RankDeficiencyError,
)

SECOND_ORDER_AGGREGATORS = ("ria", "euclidean_cov", "log_euclidean_cov")
FIRST_ORDER_AGGREGATORS = ("mean", "gem")
AGGREGATORS = SECOND_ORDER_AGGREGATORS + FIRST_ORDER_AGGREGATORS

SQRT_BACKENDS = ("newton_schulz", "eig_oracle")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for one descriptor run. Defaults follow the reference setup:
    tau=0, epsilon=1e-4, K=3 square-root iterations, power 0.5."""

    dim: int = 64
    tau: float = 0.0
    epsilon: float = 1e-4
    ns_iterations: int = 3
    alpha: float = 0.5
    seed: int = 0
    sqrt_backend: str = "newton_schulz"
    aggregator: str = "ria"
    gem_power: float = 3.0

    def validated(self):
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.ns_iterations < 1:
            raise ConfigError(f"ns_iterations must be >= 1, got {self.ns_iterations}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.sqrt_backend not in SQRT_BACKENDS:
            raise ConfigError(f"unknown sqrt backend {self.sqrt_backend!r}")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"unknown aggregator {self.aggregator!r}")
        if self.sqrt_backend == "newton_schulz" and self.aggregator == "ria" and self.alpha != 0.5:
            raise ConfigError(
                "the newton_schulz backend computes a matrix square root and is "
                f"only valid for alpha=0.5 (got alpha={self.alpha}); use the "
                "eig_oracle backend for other powers"
            )
        if self.gem_power <= 0:
            raise ConfigError(f"gem power must be > 0, got {self.gem_power}")
        return self

    def with_(self, **kwargs):
        return replace(self, **kwargs).validated()


@dataclass(frozen=True)
class SpdDescriptor:
    """Regularized scene covariance, with its Frobenius norm cached."""

    matrix: np.ndarray
    frob_scale: float


def validate_features(x):
    """Check a patch-feature matrix: 2-D, finite, at least two rows."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"feature matrix must be 2-D, got shape {a.shape}")
    if a.shape[0] < 2:
        raise InsufficientSamplesError(
            f"need at least 2 patches for a sample covariance, got {a.shape[0]}"
        )
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("feature matrix has non-finite entries")
    return a


def project(features, basis):
    """X_raw (N x D_in) times the basis (D_in x d) -> projected N x d."""
    x = validate_features(features)
    n, d_in = x.shape
    if d_in != basis.dim_in:
        raise DimensionError(
            f"feature dim {d_in} does not match basis input dim {basis.dim_in}"
        )
    if basis.dim_out >= n:
        raise RankDeficiencyError(
            f"projected dim d={basis.dim_out} must be smaller than the patch "
            f"count N={n} for a full-rank covariance"
        )
    return x @ basis.matrix


def sample_covariance(projected):
    """Unbiased sample covariance (divides by N - 1) of the projected rows."""
    x = np.asarray(projected, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f"need N >= 2 samples, got {n}")
    centered = x - x.mean(axis=0)
    return linalg.symmetrize(centered.T @ centered / (n - 1))


def rectify(c_raw, tau):
    """Hard-threshold off-diagonal entries: keep |c_ij| > tau, zero the rest."""
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau}")
    c = linalg.symmetrize(c_raw)
    keep = np.abs(c) > tau
    np.fill_diagonal(keep, True)
    return np.where(keep, c, 0.0)


def regularize(c_rec, epsilon):
    """Shift the spectrum by epsilon: C = C_rec + epsilon * I."""
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    c = linalg.symmetrize(c_rec)
    c = c + epsilon * np.eye(c.shape[0])
    return SpdDescriptor(matrix=c, frob_scale=linalg.frobenius_norm(c))


def newton_schulz_sqrt(c, k_iters):
    """Coupled Newton-Schulz approximation of the matrix square root.

    Pre-normalizes by the Frobenius norm so the spectrum lies in (0, 1],
    runs K coupled updates, then compensates by sqrt(||C||_F). The
    result is symmetrized to suppress round-off drift.
    """
    if k_iters < 1:
        raise ConfigError(f"need at least one iteration, got {k_iters}")
    if isinstance(c, SpdDescriptor):
        c = c.matrix
    c = linalg.symmetrize(c)
    d = c.shape[0]
    norm = linalg.frobenius_norm(c)
    if norm == 0.0:
        raise InvalidInputError("cannot take the square root of the zero matrix")
    y = c / norm
    z = np.eye(d)
    y0_norm = linalg.frobenius_norm(y)
    eye3 = 3.0 * np.eye(d)
    for k in range(1, k_iters + 1):
        t = 0.5 * (eye3 - z @ y)
        y = y @ t
        z = t @ z
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise DivergenceError(
                f"non-finite Newton-Schulz iterate at iteration {k}", iteration=k
            )
        if linalg.frobenius_norm(y) > 1e6 * y0_norm:
            raise DivergenceError(
                f"Newton-Schulz iterate exploded at iteration {k}", iteration=k
            )
    return linalg.symmetrize(y * math.sqrt(norm))


def newton_schulz_residuals(c, k_iters):
    """||Z_k Y_k - I||_F for k = 1..K; diagnostic for convergence studies."""
    c = linalg.symmetrize(c)
    d = c.shape[0]
    norm = linalg.frobenius_norm(c)
    y = c / norm
    z = np.eye(d)
    eye3 = 3.0 * np.eye(d)
    residuals = []
    for _ in range(k_iters):
        t = 0.5 * (eye3 - z @ y)
        y = y @ t
        z = t @ z
        residuals.append(linalg.frobenius_norm(z @ y - np.eye(d)))
    return residuals


def isometric_vectorize(m):
    """Flatten a symmetric matrix into d(d+1)/2 numbers, preserving the
    Frobenius inner product: diagonal first, then the strict upper
    triangle (row-major) scaled by sqrt(2)."""
    a = linalg.symmetrize(m)
    d = a.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate([np.diagonal(a), math.sqrt(2.0) * a[iu]])


def _l2_normalize(v):
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise InvalidInputError("cannot L2-normalize a zero descriptor")
    return v / norm


def _power_transform(c, cfg):
    """Linearization stage: matrix power / log per aggregator and backend."""
    if cfg.aggregator == "log_euclidean_cov":
        return linalg.spd_log(c)
    if cfg.aggregator == "euclidean_cov":
        return linalg.symmetrize(c)
    # ria
    if cfg.sqrt_backend == "newton_schulz" and cfg.alpha == 0.5:
        return newton_schulz_sqrt(c, cfg.ns_iterations)
    if cfg.alpha == 1.0:
        return linalg.symmetrize(c)
    return linalg.matrix_function(c, "power", cfg.alpha)


def descriptor_from_spd(c, cfg):
    """Descriptor for an already-built SPD matrix: linearize, vectorize,
    L2-normalize. Shared by the pipeline, the ablation sweep, and tests."""
    cfg.validated()
    if isinstance(c, SpdDescriptor):
        c = c.matrix
    m = _power_transform(c, cfg)
    return _l2_normalize(isometric_vectorize(m))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def spd_from_projected(projected, cfg):
    """Covariance -> rectify -> scale-normalize -> regularize.

    The rectified covariance is divided by its Frobenius norm before the
    epsilon shift. The final L2 normalization discards the global scale
    anyway, and normalizing here makes the descriptor exactly invariant
    to feature rescaling instead of approximately (the fixed epsilon
    would otherwise act at a scale-dependent relative strength).
    """
    c_raw = _stage("sample_covariance", sample_covariance, projected)
    c_rec = _stage("rectify", rectify, c_raw, cfg.tau)
    norm = linalg.frobenius_norm(c_rec)
    if norm > 0.0:
        c_rec = c_rec / norm
    return _stage("regularize", regularize, c_rec, cfg.epsilon)


def aggregate_projected(projected, cfg):
    """Second-order descriptor for features already in projected d-space."""
    cfg.validated()
    spd = spd_from_projected(projected, cfg)
    return _stage("linearize_vectorize", descriptor_from_spd, spd, cfg)


def aggregate(features, basis, cfg):
    """Full second-order pipeline on raw patch features; returns a unit vector
    of dimension d(d+1)/2."""
    cfg.validated()
    projected = _stage("project", project, features, basis)
    return aggregate_projected(projected, cfg)


def aggregate_baseline(features, cfg):
    """First-order baselines on raw features: mean pooling or GeM pooling,
    both L2-normalized. GeM clamps activations at zero so fractional
    powers stay real."""
    cfg.validated()
    x = validate_features(features)
    if cfg.aggregator == "mean":
        pooled = x.mean(axis=0)
    elif cfg.aggregator == "gem":
        clamped = np.maximum(x, 0.0)
        pooled = np.power(np.power(clamped, cfg.gem_power).mean(axis=0), 1.0 / cfg.gem_power)
    else:
        raise ConfigError(f"{cfg.aggregator!r} is not a first-order baseline")
    return _l2_normalize(pooled)


def compute_descriptor(features, basis, cfg):
    """Dispatch to the second-order pipeline or a first-order baseline."""
    if cfg.aggregator in FIRST_ORDER_AGGREGATORS:
        return aggregate_baseline(features, cfg)
    return aggregate(features, basis, cfg)
