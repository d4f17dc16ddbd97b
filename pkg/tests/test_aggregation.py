import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_symmetric, relative_error
from ria import aggregation as agg
from ria import linalg
from ria.aggregation import PipelineConfig
from ria.errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InsufficientSamplesError,
    PipelineError,
    RankDeficiencyError,
)


def features(rng, n=300, d_in=48):
    return rng.standard_normal((n, d_in))


class TestProject:
    def test_identity_projection(self, rng):
        x = features(rng, n=50, d_in=8)
        basis = linalg.ProjectionBasis(matrix=np.eye(8), seed=0)
        assert np.allclose(agg.project(x, basis), x)

    def test_zero_features(self):
        basis = linalg.random_orthonormal_basis(8, 4, seed=0)
        out = agg.project(np.zeros((20, 8)), basis)
        assert np.allclose(out, 0.0)

    def test_norm_non_expansive(self, rng):
        x = features(rng, n=300, d_in=64)
        basis = linalg.random_orthonormal_basis(64, 16, seed=1)
        assert np.linalg.norm(agg.project(x, basis)) <= np.linalg.norm(x) + 1e-9

    def test_dim_mismatch(self, rng):
        basis = linalg.random_orthonormal_basis(32, 8, seed=0)
        with pytest.raises(DimensionError):
            agg.project(features(rng, n=50, d_in=16), basis)

    def test_rank_deficiency_names_n_and_d(self, rng):
        basis = linalg.random_orthonormal_basis(64, 32, seed=0)
        with pytest.raises(RankDeficiencyError, match=r"d=32.*N=10"):
            agg.project(features(rng, n=10, d_in=64), basis)


class TestSampleCovariance:
    def test_identical_rows(self):
        x = np.tile([1.0, 2.0, 3.0], (10, 1))
        assert np.allclose(agg.sample_covariance(x), 0.0, atol=1e-14)

    def test_hand_computed(self):
        c = agg.sample_covariance(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.allclose(c, [[2.0, 0.0], [0.0, 0.0]], atol=1e-14)

    def test_psd_up_to_roundoff(self, rng):
        c = agg.sample_covariance(rng.standard_normal((500, 32)))
        assert linalg.min_eigenvalue(c) >= -1e-12

    def test_matches_naive_two_pass(self, rng):
        x = rng.standard_normal((40, 6))
        mean = x.mean(axis=0)
        naive = np.zeros((6, 6))
        for row in x:
            dev = row - mean
            naive += np.outer(dev, dev)
        naive /= x.shape[0] - 1
        assert np.linalg.norm(agg.sample_covariance(x) - naive) <= 1e-12

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamplesError):
            agg.sample_covariance(np.ones((1, 4)))


class TestRectify:
    def test_tau_zero_keeps_nonzeros(self, rng):
        c = agg.sample_covariance(rng.standard_normal((30, 5)))
        assert np.array_equal(agg.rectify(c, 0.0), c)

    def test_threshold_rule(self):
        c = np.array([[5.0, 0.1], [0.1, 3.0]])
        assert np.allclose(agg.rectify(c, 0.5), [[5.0, 0.0], [0.0, 3.0]])

    def test_diagonal_always_kept(self):
        c = np.diag([1.0, -2.0, 0.5])
        for tau in (0.0, 1.0, 100.0):
            assert np.array_equal(agg.rectify(c, tau), c)

    def test_negative_tau(self):
        with pytest.raises(ConfigError):
            agg.rectify(np.eye(2), -0.1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6), st.floats(min_value=0.0, max_value=2.0))
    def test_idempotent(self, seed, tau):
        rng = np.random.default_rng(seed)
        c = random_symmetric(6, rng)
        once = agg.rectify(c, tau)
        assert np.array_equal(agg.rectify(once, tau), once)


class TestRegularize:
    def test_zero_matrix(self):
        out = agg.regularize(np.zeros((3, 3)), 1e-4)
        assert np.allclose(out.matrix, 1e-4 * np.eye(3))
        assert math.isclose(out.frob_scale, 1e-4 * math.sqrt(3), rel_tol=1e-12)

    def test_diagonal_shift(self):
        out = agg.regularize(np.diag([1.0, 2.0]), 0.5)
        assert np.allclose(out.matrix, np.diag([1.5, 2.5]))

    def test_singular_psd_gets_min_eig_epsilon(self):
        c = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank 1, min eig 0
        out = agg.regularize(c, 1e-3)
        assert abs(linalg.min_eigenvalue(out.matrix) - 1e-3) <= 1e-12

    def test_bad_epsilon(self):
        with pytest.raises(ConfigError):
            agg.regularize(np.eye(2), 0.0)


class TestNewtonSchulz:
    def test_identity_closed_form(self):
        # sqrt(I) = I: the pre-normalization by ||I||_F = sqrt(d) is undone
        # exactly by the sqrt(||C||_F) compensation; d=1 is exact at any K
        out = agg.newton_schulz_sqrt(np.eye(1), 1)
        assert np.allclose(out, np.eye(1), atol=1e-14)
        out = agg.newton_schulz_sqrt(np.eye(5), 20)
        assert np.allclose(out, np.eye(5), atol=1e-8)
        assert np.allclose(linalg.spd_sqrt_eig(np.eye(5)), np.eye(5), atol=1e-12)

    def test_diagonal_converges(self):
        out = agg.newton_schulz_sqrt(np.diag([4.0, 1.0]), 20)
        assert relative_error(out, np.diag([2.0, 1.0])) <= 1e-6

    def test_k3_error_vs_oracle_within_regression_bound(self):
        # empirical bound for d=128, condition <= 50 (measured ~0.27)
        c = linalg.random_spd(128, 123, cond=50)
        err = relative_error(agg.newton_schulz_sqrt(c, 3), linalg.spd_sqrt_eig(c))
        assert err <= 0.40

    def test_orthogonal_equivariance(self):
        c = linalg.random_spd(16, 6, cond=30)
        q = linalg.random_orthogonal(16, 13)
        lhs = agg.newton_schulz_sqrt(q @ c @ q.T, 3)
        rhs = q @ agg.newton_schulz_sqrt(c, 3) @ q.T
        assert np.linalg.norm(lhs - rhs) <= 1e-8

    def test_divergence_reports_iteration(self):
        with pytest.raises(DivergenceError) as exc_info:
            agg.newton_schulz_sqrt(np.diag([1.0, -1.0]), 30)
        assert exc_info.value.iteration is not None

    def test_residuals_strictly_decreasing(self):
        res = agg.newton_schulz_residuals(linalg.random_spd(64, 8, cond=40), 10)
        assert all(res[i + 1] < res[i] for i in range(len(res) - 1))

    def test_accepts_spd_descriptor(self):
        spd = agg.regularize(np.diag([4.0, 1.0]), 1e-8)
        out = agg.newton_schulz_sqrt(spd, 20)
        assert relative_error(out, np.diag([2.0, 1.0])) <= 1e-5


class TestIsometricVectorize:
    def test_two_by_two(self):
        v = agg.isometric_vectorize(np.array([[1.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(v, [1.0, 3.0, 2.0 * math.sqrt(2)], atol=1e-14)

    def test_identity(self):
        assert np.allclose(agg.isometric_vectorize(np.eye(3)), [1, 1, 1, 0, 0, 0])

    def test_inner_product_preserved(self, rng):
        a = random_symmetric(10, rng)
        b = random_symmetric(10, rng)
        lhs = agg.isometric_vectorize(a) @ agg.isometric_vectorize(b)
        rhs = np.trace(a @ b)
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(a) * np.linalg.norm(b)


class TestAggregate:
    def setup_method(self):
        self.cfg = PipelineConfig(dim=16)
        self.basis = linalg.random_orthonormal_basis(48, 16, seed=7)

    def test_unit_norm(self, rng):
        v = agg.aggregate(features(rng), self.basis, self.cfg)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-9
        assert v.shape == (16 * 17 // 2,)

    def test_scale_invariance(self, rng):
        x = features(rng)
        a = agg.aggregate(x, self.basis, self.cfg)
        b = agg.aggregate(3.0 * x, self.basis, self.cfg)
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_second_order_separates_equal_means(self, rng):
        # same mean, covariance dominant in different axes
        n, d_in = 600, 48
        mu = np.ones(d_in)
        scale_a = np.ones(d_in)
        scale_a[:8] = 3.0
        scale_b = np.ones(d_in)
        scale_b[-8:] = 3.0
        dev_a = rng.standard_normal((n, d_in)) * scale_a
        dev_b = rng.standard_normal((n, d_in)) * scale_b
        xa = mu + dev_a - dev_a.mean(axis=0)
        xb = mu + dev_b - dev_b.mean(axis=0)
        va = agg.aggregate(xa, self.basis, self.cfg)
        vb = agg.aggregate(xb, self.basis, self.cfg)
        assert va @ vb < 0.99
        ma = agg.aggregate_baseline(xa, self.cfg.with_(aggregator="mean"))
        mb = agg.aggregate_baseline(xb, self.cfg.with_(aggregator="mean"))
        assert abs(ma @ mb - 1.0) <= 1e-12

    def test_backend_agreement(self, rng):
        x = features(rng)
        v_ns = agg.aggregate(x, self.basis, self.cfg.with_(ns_iterations=20))
        v_eig = agg.aggregate(x, self.basis, self.cfg.with_(sqrt_backend="eig_oracle"))
        assert v_ns @ v_eig >= 1.0 - 1e-8

    def test_stage_error_tagged(self, rng):
        with pytest.raises(PipelineError, match="project"):
            agg.aggregate(features(rng, n=10), self.basis, self.cfg)

    def test_ns_backend_requires_half_power(self):
        with pytest.raises(ConfigError):
            PipelineConfig(alpha=0.75).validated()
        PipelineConfig(alpha=0.75, sqrt_backend="eig_oracle").validated()

    def test_euclidean_and_log_variants_run(self, rng):
        x = features(rng)
        for name in ("euclidean_cov", "log_euclidean_cov"):
            v = agg.aggregate(x, self.basis, self.cfg.with_(aggregator=name))
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-9


class TestBaselines:
    def test_mean_of_repeated_row(self):
        r = np.array([3.0, 4.0])
        x = np.tile(r, (7, 1))
        v = agg.aggregate_baseline(x, PipelineConfig(aggregator="mean"))
        assert np.allclose(v, r / np.linalg.norm(r))

    def test_gem_p1_equals_mean_on_nonnegative(self, rng):
        x = np.abs(rng.standard_normal((20, 6)))
        gem = agg.aggregate_baseline(x, PipelineConfig(aggregator="gem", gem_power=1.0))
        mean = agg.aggregate_baseline(x, PipelineConfig(aggregator="mean"))
        assert np.allclose(gem, mean, atol=1e-12)

    def test_gem_constant_features(self):
        c = np.array([2.0, 5.0, 1.0])
        x = np.tile(c, (9, 1))
        v = agg.aggregate_baseline(x, PipelineConfig(aggregator="gem", gem_power=3.0))
        assert np.allclose(v, c / np.linalg.norm(c), atol=1e-12)

    def test_bad_gem_power(self):
        with pytest.raises(ConfigError):
            PipelineConfig(aggregator="gem", gem_power=0.0).validated()
