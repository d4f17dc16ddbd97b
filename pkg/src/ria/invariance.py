"""Invariance laboratory.

Feature-space perturbation models (intensity scaling, orthogonal
conjugation, additive noise, and an affine brightness extension), drift
measurement across aggregators, and a seeded synthetic scene generator
producing equal-mean, covariance-distinct places for controlled
retrieval benchmarks.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ria import linalg
from ria.aggregation import (
    FIRST_ORDER_AGGREGATORS,
    aggregate_baseline,
    aggregate_projected,
)
from ria.errors import ConfigError, DimensionError, InvalidInputError
from ria.metrics import descriptor_distance

PERTURBATION_KINDS = (
    "intensity_scale",
    "orthogonal_conjugation",
    "additive_noise",
    "affine_brightness",
)


@dataclass(frozen=True)
class Perturbation:
    """One feature-space perturbation model.

    intensity_scale: x -> scale * x
    orthogonal_conjugation: x -> Q x with a seeded random Q in O(d)
    additive_noise: x -> x + N(0, sigma^2) i.i.d., seeded
    affine_brightness: x -> scale * x + offset (constant shift; not in the
        reference perturbation set, added because it separates centered
        second-order descriptors from mean pooling)
    """

    kind: str
    scale: float = 1.0
    sigma: float = 0.0
    offset: float = 0.0
    seed: int = 0

    def validated(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ConfigError(f"unknown perturbation kind {self.kind!r}")
        if self.kind in ("intensity_scale", "affine_brightness") and self.scale <= 0:
            raise ConfigError(f"intensity scale must be > 0, got {self.scale}")
        if self.sigma < 0:
            raise ConfigError(f"noise sigma must be >= 0, got {self.sigma}")
        return self

    @property
    def magnitude(self):
        if self.kind == "intensity_scale":
            return self.scale
        if self.kind == "additive_noise":
            return self.sigma
        if self.kind == "affine_brightness":
            return self.offset
        return float(self.seed)


def perturb(features, p):
    """Apply a perturbation to an N x d feature matrix (projected space)."""
    p.validated()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got shape {x.shape}")
    if p.kind == "intensity_scale":
        return p.scale * x
    if p.kind == "affine_brightness":
        return p.scale * x + p.offset
    if p.kind == "additive_noise":
        rng = np.random.Generator(np.random.Philox(p.seed))
        return x + p.sigma * rng.standard_normal(x.shape)
    # orthogonal_conjugation: each row x_i -> Q x_i
    q = linalg.random_orthogonal(x.shape[1], p.seed)
    return x @ q.T


@dataclass(frozen=True)
class DriftReport:
    """Drift per aggregator for one perturbation; drift is 1 - cosine for
    descriptor drift, or |d' - d| for pairwise distance drift."""

    perturbation: Perturbation
    per_aggregator: dict
    mode: str = "descriptor"  # or "pairwise_distance"


def _descriptor_projected(x, aggregator, cfg):
    """Descriptor from already-projected features for any aggregator."""
    cfg = cfg.with_(aggregator=aggregator)
    if aggregator in FIRST_ORDER_AGGREGATORS:
        return aggregate_baseline(x, cfg)
    return aggregate_projected(x, cfg)


def measure_drift(features, p, aggregators, cfg):
    """1 - cosine similarity between each aggregator's descriptor of X and
    of perturb(X)."""
    x = np.asarray(features, dtype=np.float64)
    drifts = {}
    xp = perturb(x, p)
    for name in aggregators:
        a = _descriptor_projected(x, name, cfg)
        b = _descriptor_projected(xp, name, cfg)
        drifts[name] = float(1.0 - a @ b)
    return DriftReport(perturbation=p, per_aggregator=drifts)


def measure_distance_drift(features_a, features_b, p, aggregators, cfg):
    """Change in the pairwise descriptor distance when both feature sets are
    perturbed. Under orthogonal conjugation individual descriptors move,
    but pairwise distances should not."""
    xa = np.asarray(features_a, dtype=np.float64)
    xb = np.asarray(features_b, dtype=np.float64)
    xa_p = perturb(xa, p)
    xb_p = perturb(xb, p)
    drifts = {}
    for name in aggregators:
        d_before = descriptor_distance(
            _descriptor_projected(xa, name, cfg), _descriptor_projected(xb, name, cfg)
        )
        d_after = descriptor_distance(
            _descriptor_projected(xa_p, name, cfg), _descriptor_projected(xb_p, name, cfg)
        )
        drifts[name] = abs(d_after - d_before)
    return DriftReport(perturbation=p, per_aggregator=drifts, mode="pairwise_distance")


@dataclass(frozen=True)
class SyntheticScene:
    """Gaussian scene model: patch features ~ N(mean, covariance_shape)."""

    place_id: int
    mean: np.ndarray
    covariance_shape: np.ndarray
    n_patches: int


def generate_scene_features(scene, seed):
    """Draw N i.i.d. patch features from the scene's Gaussian, using the
    spectral square root of the covariance shape. Seeded and reproducible."""
    cov = linalg.symmetrize(scene.covariance_shape)
    if linalg.min_eigenvalue(cov) <= 0:
        raise InvalidInputError("scene covariance shape must be strictly PD")
    if scene.n_patches <= cov.shape[0]:
        raise InvalidInputError("need more patches than dimensions (N > d)")
    factor = linalg.spd_sqrt_eig(cov)
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((scene.n_patches, cov.shape[0]))
    return np.asarray(scene.mean, dtype=np.float64) + z @ factor


def make_scenes(n_places, dim, n_patches, seed, cond=16.0):
    """Equal-mean scenes whose covariance shapes differ (random spectra and
    orientations); the construction where first-order pooling is blind."""
    scenes = []
    for i in range(n_places):
        shape = linalg.random_spd(dim, seed=seed * 100_003 + i * 7 + 1, cond=cond)
        scenes.append(
            SyntheticScene(
                place_id=i,
                mean=np.zeros(dim),
                covariance_shape=shape,
                n_patches=n_patches,
            )
        )
    return scenes


def make_covariance_benchmark(n_places, queries_per_place, n_patches, dim, seed):
    """Synthetic retrieval benchmark: one database draw and several query
    re-draws per place. Returns (database, queries, positives) where
    database and queries are lists of (item_id, features) and positives
    maps query_id -> set of database ids."""
    scenes = make_scenes(n_places, dim, n_patches, seed)
    database = []
    queries = []
    positives = {}
    for scene in scenes:
        db_id = f"place{scene.place_id:04d}_db"
        database.append((db_id, generate_scene_features(scene, seed=seed + 10_000 + scene.place_id)))
        for j in range(queries_per_place):
            q_id = f"place{scene.place_id:04d}_q{j}"
            queries.append(
                (q_id, generate_scene_features(scene, seed=seed + 20_000 + scene.place_id * 101 + j))
            )
            positives[q_id] = {db_id}
    return database, queries, positives


def write_drift_csv(reports, path):
    """Serialize drift reports as (perturbation_kind, magnitude, aggregator, drift)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["perturbation_kind", "magnitude", "aggregator", "drift"])
        for report in reports:
            kind = report.perturbation.kind
            if report.mode == "pairwise_distance":
                kind += "_pairwise"
            for name, value in report.per_aggregator.items():
                writer.writerow([kind, repr(report.perturbation.magnitude), name, repr(value)])
