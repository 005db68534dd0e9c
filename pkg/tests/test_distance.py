import math

import numpy as np
import pytest

from assocbench.distance import (
    DistanceContext,
    DistanceKind,
    asso_ll_sq,
    generalized_mahalanobis_sq,
    mahalanobis_sq,
)
from assocbench.gaussian import GaussianDensity, log_density

CTX = DistanceContext()


class TestMahalanobis:
    def test_zero_delta(self):
        assert mahalanobis_sq([0.0, 0.0], np.eye(2)) == 0.0

    def test_scalar_fig2_point(self):
        # 0.7 m offset with variance 0.49 m^2 gives exactly one.
        assert mahalanobis_sq([0.7], [[0.49]]) == pytest.approx(1.0, abs=1e-12)

    def test_correlated_2d_against_adjugate_inverse(self):
        gen = np.random.default_rng(1)
        for _ in range(50):
            a = gen.normal(size=(2, 2))
            sigma = a @ a.T + 0.5 * np.eye(2)
            delta = gen.normal(size=2)
            det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
            inv = np.array([[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]) / det
            expected = float(delta @ inv @ delta)
            assert mahalanobis_sq(delta, sigma) == pytest.approx(expected, rel=1e-10)

    def test_non_spd_rejected(self):
        with pytest.raises(ValueError):
            mahalanobis_sq([1.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


class TestGeneralizedMahalanobis:
    def test_equal_means_vanish(self):
        m = np.array([1.0, 2.0])
        assert generalized_mahalanobis_sq(m, np.eye(2), m, 2 * np.eye(2)) == 0.0

    def test_scalar_half_variances(self):
        assert generalized_mahalanobis_sq([0.7], [[0.245]], [0.0], [[0.245]]) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_argument_swap_symmetry(self):
        gen = np.random.default_rng(2)
        for _ in range(30):
            m1, m2 = gen.normal(size=2), gen.normal(size=2)
            a = gen.normal(size=(2, 2))
            b = gen.normal(size=(2, 2))
            s1 = a @ a.T + 0.3 * np.eye(2)
            s2 = b @ b.T + 0.3 * np.eye(2)
            assert generalized_mahalanobis_sq(m1, s1, m2, s2) == pytest.approx(
                generalized_mahalanobis_sq(m2, s2, m1, s1), rel=1e-12
            )


class TestAssoLogLikelihood:
    def test_scalar_fig2_value(self):
        got = asso_ll_sq([0.7], [[0.49]], CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
        assert got == pytest.approx(2.1245271785318804, abs=1e-12)

    def test_2d_zero_delta_identity_cov(self):
        got = asso_ll_sq([0.0, 0.0], np.eye(2), CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
        assert got == pytest.approx(2 * math.log(2 * math.pi), abs=1e-12)

    def test_term_decomposition(self):
        gen = np.random.default_rng(3)
        ctx = DistanceContext(detection_probability=0.85)
        for _ in range(50):
            n = int(gen.integers(1, 5))
            a = gen.normal(size=(n, n))
            sigma = a @ a.T + 0.5 * np.eye(n)
            delta = gen.normal(size=n)
            full = asso_ll_sq(delta, sigma, ctx, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
            maha = mahalanobis_sq(delta, sigma)
            extra = (
                math.log(np.linalg.det(sigma))
                + n * math.log(2 * math.pi)
                - 2 * math.log(0.85)
            )
            assert full - maha == pytest.approx(extra, abs=1e-10)

    def test_mahalanobis_kind_drops_all_terms(self):
        delta, sigma = [1.0, -2.0], np.diag([2.0, 3.0])
        assert asso_ll_sq(delta, sigma, CTX, DistanceKind.MAHALANOBIS) == pytest.approx(
            mahalanobis_sq(delta, sigma), abs=1e-14
        )

    def test_no_dim_term_kind(self):
        delta, sigma = [1.0, -2.0], np.diag([2.0, 3.0])
        full = asso_ll_sq(delta, sigma, CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
        trimmed = asso_ll_sq(
            delta, sigma, CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM
        )
        assert full - trimmed == pytest.approx(2 * math.log(2 * math.pi), abs=1e-12)

    def test_minus_two_log_likelihood_identity(self):
        gen = np.random.default_rng(4)
        for _ in range(300):
            n = int(gen.integers(1, 4))
            a = gen.normal(size=(n, n))
            sigma = a @ a.T + 0.4 * np.eye(n)
            delta = gen.normal(size=n)
            p_d = float(gen.uniform(0.2, 1.0))
            ctx = DistanceContext(detection_probability=p_d)
            full = asso_ll_sq(delta, sigma, ctx, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
            ll = log_density(delta, GaussianDensity(np.zeros(n), sigma))
            assert full + 2.0 * (ll + math.log(p_d)) == pytest.approx(0.0, abs=1e-10)


class TestScaleBehaviour:
    def test_mahalanobis_strictly_decreasing_in_variance(self):
        grid = np.arange(0.05, 2.0, 1e-3)
        vals = [mahalanobis_sq([0.7], [[v]]) for v in grid]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_asso_ll_argmin_at_delta_squared(self):
        grid = np.arange(0.05, 2.0, 1e-3)
        vals = [
            asso_ll_sq([0.7], [[v]], CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
            for v in grid
        ]
        argmin = grid[int(np.argmin(vals))]
        assert abs(argmin - 0.49) < 1e-3 + 1e-9

    def test_argmin_divergence_between_distances(self):
        # A close mean with small covariance against a far mean with a large
        # one: the plain quadratic form prefers the far candidate, the
        # log-likelihood distance the close one.
        track_cov = 0.01 * np.eye(2)
        close_delta, close_R = np.array([0.5, 0.0]), 0.04 * np.eye(2)
        far_delta, far_R = np.array([2.0, 0.0]), 1.0 * np.eye(2)
        cands = [(close_delta, track_cov + close_R), (far_delta, track_cov + far_R)]
        maha = [mahalanobis_sq(d, s) for d, s in cands]
        asso = [
            asso_ll_sq(d, s, CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD) for d, s in cands
        ]
        assert int(np.argmin(maha)) == 1
        assert int(np.argmin(asso)) == 0


class TestContext:
    def test_detection_probability_bounds(self):
        with pytest.raises(ValueError, match="detection_probability"):
            DistanceContext(detection_probability=0.0)
        with pytest.raises(ValueError, match="detection_probability"):
            DistanceContext(detection_probability=1.2)

    def test_unit_volume_enforced(self):
        with pytest.raises(ValueError, match="volume"):
            DistanceContext(measurement_volume=2.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            asso_ll_sq([1.0], np.eye(2), CTX, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD)
