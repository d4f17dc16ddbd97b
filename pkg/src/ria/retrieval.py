"""Descriptor index, exact top-K search, and Recall@K evaluation."""

import csv
import json
from dataclasses import dataclass

import numpy as np

from ria.errors import DimensionError, FormatError, InvalidInputError


@dataclass(frozen=True)
class DescriptorIndex:
    """Immutable in-memory index: row i of matrix is the descriptor of ids[i]."""

    ids: tuple
    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.ids)


def build_index(entries, norm_tol=1e-6):
    """Build an index from (item_id, descriptor) pairs.

    Validates uniqueness of ids, uniform dimension, and unit norms;
    preserves insertion order (which fixes the search tie-break)."""
    ids = []
    rows = []
    seen = set()
    for item_id, descriptor in entries:
        v = np.asarray(descriptor, dtype=np.float64)
        if v.ndim != 1:
            raise DimensionError(f"descriptor for {item_id!r} is not a vector")
        if rows and v.shape[0] != rows[0].shape[0]:
            raise DimensionError(
                f"descriptor for {item_id!r} has dim {v.shape[0]}, "
                f"expected {rows[0].shape[0]}"
            )
        if abs(np.linalg.norm(v) - 1.0) > norm_tol:
            raise InvalidInputError(f"descriptor for {item_id!r} is not unit-norm")
        if item_id in seen:
            raise InvalidInputError(f"duplicate item id {item_id!r}")
        seen.add(item_id)
        ids.append(str(item_id))
        rows.append(v)
    if not rows:
        raise InvalidInputError("cannot build an empty index")
    return DescriptorIndex(ids=tuple(ids), matrix=np.vstack(rows))


def search(index, query, k):
    """Exact top-k by dot-product similarity, descending; ties broken by
    insertion order. Returns a list of (item_id, similarity)."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimensionError(f"query dim {q.shape} does not match index dim {index.dim}")
    sims = index.matrix @ q
    order = np.argsort(-sims, kind="stable")[: min(k, len(index.ids))]
    return [(index.ids[i], float(sims[i])) for i in order]


@dataclass(frozen=True)
class Query:
    query_id: str
    positives: frozenset


@dataclass(frozen=True)
class DatasetManifest:
    """Database listing plus ground-truth positive sets per query."""

    database_items: tuple
    queries: tuple

    def validated(self):
        db = set(self.database_items)
        if len(db) != len(self.database_items):
            raise FormatError("manifest database contains duplicate ids")
        for q in self.queries:
            if not q.positives:
                raise FormatError(f"query {q.query_id!r} has no positives")
            missing = q.positives - db
            if missing:
                raise FormatError(
                    f"query {q.query_id!r} references unknown database ids: "
                    f"{sorted(missing)[:5]}"
                )
        return self


def manifest_from_dict(doc):
    try:
        database = tuple(str(i) for i in doc["database"])
        queries = tuple(
            Query(query_id=str(q["id"]), positives=frozenset(str(p) for p in q["positives"]))
            for q in doc["queries"]
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed manifest document: {exc}") from exc
    return DatasetManifest(database_items=database, queries=queries).validated()


def manifest_to_dict(manifest):
    return {
        "database": list(manifest.database_items),
        "queries": [
            {"id": q.query_id, "positives": sorted(q.positives)} for q in manifest.queries
        ],
    }


def load_manifest(path):
    with open(path, "r") as fh:
        return manifest_from_dict(json.load(fh))


@dataclass(frozen=True)
class RecallTable:
    """Recall@K values keyed by K; monotone nondecreasing in K."""

    rows: dict

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "recall"])
            for k in sorted(self.rows):
                writer.writerow([k, repr(self.rows[k])])


def evaluate_recall(index, query_descriptors, manifest, ks):
    """Recall@K over the manifest's queries: the fraction whose top-K
    contains at least one ground-truth positive."""
    manifest.validated()
    if not manifest.queries:
        raise InvalidInputError("manifest has no queries to evaluate")
    ks = sorted(set(int(k) for k in ks))
    if any(k < 1 for k in ks):
        raise InvalidInputError("every K must be >= 1")
    by_id = {qid: np.asarray(v, dtype=np.float64) for qid, v in query_descriptors}
    k_max = min(max(ks), len(index))
    hits = {k: 0 for k in ks}
    for q in manifest.queries:
        if q.query_id not in by_id:
            raise InvalidInputError(f"no descriptor for query {q.query_id!r}")
        ranked = search(index, by_id[q.query_id], k_max)
        first_hit = None
        for rank, (item_id, _sim) in enumerate(ranked, start=1):
            if item_id in q.positives:
                first_hit = rank
                break
        if first_hit is not None:
            for k in ks:
                if first_hit <= k:
                    hits[k] += 1
    n = len(manifest.queries)
    return RecallTable(rows={k: hits[k] / n for k in ks})
