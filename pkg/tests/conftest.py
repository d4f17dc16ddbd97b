import json

import numpy as np
import pytest

from ria import linalg
from ria.invariance import make_covariance_benchmark
from ria.io import write_feature_file


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(d, rng):
    return linalg.symmetrize(rng.standard_normal((d, d)))


def relative_error(approx, exact):
    return np.linalg.norm(approx - exact) / np.linalg.norm(exact)


def write_synthetic_dataset(root, n_places, queries_per_place, n_patches, dim, seed):
    """Materialize a covariance-distinct benchmark as RIAF dirs + manifest.

    Returns (db_dir, query_dir, manifest_path)."""
    database, queries, positives = make_covariance_benchmark(
        n_places, queries_per_place, n_patches, dim, seed
    )
    db_dir = root / "db"
    q_dir = root / "queries"
    db_dir.mkdir(parents=True, exist_ok=True)
    q_dir.mkdir(parents=True, exist_ok=True)
    for item_id, feats in database:
        write_feature_file(db_dir / f"{item_id}.riaf", feats)
    for item_id, feats in queries:
        write_feature_file(q_dir / f"{item_id}.riaf", feats)
    manifest_path = root / "manifest.json"
    doc = {
        "database": [i for i, _f in database],
        "queries": [{"id": q, "positives": sorted(p)} for q, p in positives.items()],
    }
    manifest_path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return db_dir, q_dir, manifest_path
