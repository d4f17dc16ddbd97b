import numpy as np
import pytest

from ria import retrieval
from ria.errors import DimensionError, FormatError, InvalidInputError


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def random_unit_rows(n, dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


class TestBuildIndex:
    def test_single_entry(self):
        index = retrieval.build_index([("a", unit([1.0, 2.0]))])
        assert len(index) == 1
        assert index.ids == ("a",)

    def test_duplicate_id_rejected(self):
        with pytest.raises(InvalidInputError, match="duplicate"):
            retrieval.build_index([("a", unit([1, 0])), ("a", unit([0, 1]))])

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            retrieval.build_index([("a", unit([1, 0])), ("b", unit([0, 1, 0]))])

    def test_non_unit_rejected(self):
        with pytest.raises(InvalidInputError, match="unit"):
            retrieval.build_index([("a", np.array([0.5, 0.0]))])

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            retrieval.build_index([])

    def test_large_smoke(self):
        m = random_unit_rows(10_000, 2080, seed=0)
        index = retrieval.build_index((f"item{i}", m[i]) for i in range(m.shape[0]))
        assert len(index) == 10_000
        top = retrieval.search(index, m[1234], 1)
        assert top[0][0] == "item1234"


class TestSearch:
    def test_exact_match_first(self):
        m = random_unit_rows(50, 16, seed=1)
        index = retrieval.build_index((f"i{i}", m[i]) for i in range(50))
        results = retrieval.search(index, m[7], 3)
        assert results[0][0] == "i7"
        assert abs(results[0][1] - 1.0) <= 1e-9

    def test_k_exceeds_size_returns_full_ranking(self):
        m = random_unit_rows(5, 8, seed=2)
        index = retrieval.build_index((f"i{i}", m[i]) for i in range(5))
        assert len(retrieval.search(index, m[0], 100)) == 5

    def test_ties_broken_by_insertion_order(self):
        v = unit([1.0, 1.0])
        index = retrieval.build_index([("first", v), ("second", v), ("third", v)])
        ranked = retrieval.search(index, v, 3)
        assert [r[0] for r in ranked] == ["first", "second", "third"]

    def test_agrees_with_full_sort_oracle(self):
        for seed in range(10):
            m = random_unit_rows(100, 12, seed=seed)
            index = retrieval.build_index((f"i{i}", m[i]) for i in range(100))
            q = random_unit_rows(1, 12, seed=seed + 500)[0]
            got = [item for item, _ in retrieval.search(index, q, 10)]
            sims = m @ q
            oracle = [f"i{i}" for i in sorted(range(100), key=lambda i: (-sims[i], i))[:10]]
            assert got == oracle

    def test_dim_mismatch(self):
        index = retrieval.build_index([("a", unit([1, 0]))])
        with pytest.raises(DimensionError):
            retrieval.search(index, unit([1, 0, 0]), 1)

    def test_bad_k(self):
        index = retrieval.build_index([("a", unit([1, 0]))])
        with pytest.raises(InvalidInputError):
            retrieval.search(index, unit([1, 0]), 0)


def make_manifest(database, queries):
    return retrieval.manifest_from_dict(
        {"database": database, "queries": [{"id": q, "positives": sorted(p)} for q, p in queries]}
    )


class TestEvaluateRecall:
    def test_self_match_perfect_recall(self):
        m = random_unit_rows(20, 8, seed=3)
        index = retrieval.build_index((f"d{i}", m[i]) for i in range(20))
        queries = [(f"q{i}", m[i]) for i in range(20)]
        manifest = make_manifest([f"d{i}" for i in range(20)], [(f"q{i}", {f"d{i}"}) for i in range(20)])
        table = retrieval.evaluate_recall(index, queries, manifest, [1, 5])
        assert table.rows == {1: 1.0, 5: 1.0}

    def test_adversarial_orthogonal_zero_recall(self):
        # database vectors orthogonal to the positive's direction
        db = [("d0", unit([1, 0, 0])), ("d1", unit([0, 1, 0]))]
        index = retrieval.build_index(db)
        queries = [("q0", unit([0, 1, 0]))]  # matches d1 but positive is d0
        manifest = make_manifest(["d0", "d1"], [("q0", {"d0"})])
        table = retrieval.evaluate_recall(index, queries, manifest, [1])
        assert table.rows[1] == 0.0

    def test_monotone_in_k(self):
        m = random_unit_rows(50, 6, seed=4)
        index = retrieval.build_index((f"d{i}", m[i]) for i in range(50))
        rng = np.random.default_rng(5)
        queries = [(f"q{i}", unit(m[i] + 0.8 * rng.standard_normal(6))) for i in range(50)]
        manifest = make_manifest(
            [f"d{i}" for i in range(50)], [(f"q{i}", {f"d{i}"}) for i in range(50)]
        )
        table = retrieval.evaluate_recall(index, queries, manifest, [1, 2, 5, 10, 50])
        values = [table.rows[k] for k in sorted(table.rows)]
        assert values == sorted(values)
        assert table.rows[50] == 1.0

    def test_missing_query_descriptor(self):
        index = retrieval.build_index([("d0", unit([1, 0]))])
        manifest = make_manifest(["d0"], [("q0", {"d0"})])
        with pytest.raises(InvalidInputError, match="q0"):
            retrieval.evaluate_recall(index, [], manifest, [1])

    def test_deterministic(self):
        m = random_unit_rows(30, 5, seed=6)
        index = retrieval.build_index((f"d{i}", m[i]) for i in range(30))
        queries = [(f"q{i}", m[(i * 7) % 30]) for i in range(30)]
        manifest = make_manifest(
            [f"d{i}" for i in range(30)], [(f"q{i}", {f"d{(i * 7) % 30}"}) for i in range(30)]
        )
        t1 = retrieval.evaluate_recall(index, queries, manifest, [1, 5])
        t2 = retrieval.evaluate_recall(index, queries, manifest, [1, 5])
        assert t1.rows == t2.rows


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = make_manifest(["a", "b"], [("q", {"a"})])
        path = tmp_path / "m.json"
        import json

        with open(path, "w") as fh:
            json.dump(retrieval.manifest_to_dict(manifest), fh)
        loaded = retrieval.load_manifest(path)
        assert loaded == manifest

    def test_unknown_positive_rejected(self):
        with pytest.raises(FormatError, match="unknown"):
            make_manifest(["a"], [("q", {"zzz"})])

    def test_empty_positives_rejected(self):
        with pytest.raises(FormatError, match="no positives"):
            make_manifest(["a"], [("q", set())])

    def test_duplicate_database_ids_rejected(self):
        with pytest.raises(FormatError, match="duplicate"):
            make_manifest(["a", "a"], [("q", {"a"})])
