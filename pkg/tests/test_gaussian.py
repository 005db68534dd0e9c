import math

import numpy as np
import pytest

from assocbench.gaussian import (
    GaussianDensity,
    RandomSpdSpec,
    log_density,
    propagate_linear,
    random_spd,
    random_spd_batch,
    sample,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestGaussianDensity:
    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            GaussianDensity(np.zeros(3), np.eye(2))

    def test_asymmetric_covariance_rejected(self):
        cov = np.array([[1.0, 0.1], [0.3, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            GaussianDensity(np.zeros(2), cov)

    def test_non_positive_definite_rejected(self):
        cov = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with pytest.raises(ValueError, match="positive definite"):
            GaussianDensity(np.zeros(2), cov)

    def test_tiny_asymmetry_within_tolerance_accepted(self):
        cov = np.eye(2)
        cov[0, 1] = 1e-11
        GaussianDensity(np.zeros(2), cov)


class TestLogDensity:
    def test_scalar_standard_normal_at_mean(self):
        d = GaussianDensity(np.zeros(1), np.eye(1))
        assert log_density([0.0], d) == pytest.approx(-0.9189385332046727, abs=1e-12)

    def test_2d_identity_at_mean(self):
        d = GaussianDensity(np.zeros(2), np.eye(2))
        assert log_density([0.0, 0.0], d) == pytest.approx(-1.8378770664093453, abs=1e-12)

    def test_2d_diagonal_against_scalar_formula(self):
        # diag(0.49, 0.49) at (0.7, 0): quadratic form 1, cross-term zero.
        d = GaussianDensity(np.zeros(2), np.diag([0.49, 0.49]))
        expected = -0.5 * 1.0 - 0.5 * (2 * math.log(2 * math.pi) + 2 * math.log(0.49))
        assert expected == pytest.approx(-1.6245271785318804, abs=1e-12)
        assert log_density([0.7, 0.0], d) == pytest.approx(expected, abs=1e-12)

    def test_point_dimension_checked(self):
        d = GaussianDensity(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError, match="dimension"):
            log_density([1.0], d)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_normalization_by_trapezoid_quadrature(self, dim):
        # integral of exp(log_density) over a 6-sigma grid must be ~1
        gen = rng(5)
        a = gen.normal(size=(dim, dim))
        cov = a @ a.T + dim * np.eye(dim)
        mean = gen.normal(size=dim)
        d = GaussianDensity(mean, cov)
        sigma = np.sqrt(np.diag(cov))
        axes = [np.linspace(mean[k] - 6 * sigma[k], mean[k] + 6 * sigma[k], 301) for k in range(dim)]
        if dim == 1:
            vals = np.array([math.exp(log_density([x], d)) for x in axes[0]])
            total = np.trapezoid(vals, axes[0])
        else:
            grid = np.array(
                [[math.exp(log_density([x, y], d)) for y in axes[1]] for x in axes[0]]
            )
            total = np.trapezoid(np.trapezoid(grid, axes[1], axis=1), axes[0])
        assert total == pytest.approx(1.0, abs=1e-3)


class TestSample:
    def test_near_degenerate_returns_mean(self):
        d = GaussianDensity([3.0, -2.0], 1e-12 * np.eye(2))
        x = sample(d, rng(1))
        assert np.all(np.abs(x - d.mean) < 1e-5)

    def test_deterministic_for_reset_stream(self):
        d = GaussianDensity(np.zeros(1), np.eye(1))
        a = sample(d, rng(42))
        b = sample(d, rng(42))
        assert np.array_equal(a, b)

    def test_law_of_large_numbers(self):
        mean = np.array([1.0, -2.0])
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        d = GaussianDensity(mean, cov)
        gen = rng(7)
        n = 100_000
        draws = np.array([sample(d, gen) for _ in range(n)])
        se_mean = np.sqrt(np.diag(cov) / n)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 3 * se_mean)
        emp = np.cov(draws.T)
        for i in range(2):
            for j in range(2):
                se = math.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / n)
                assert abs(emp[i, j] - cov[i, j]) < 3 * se


class TestPropagateLinear:
    def test_identity_map_with_tiny_noise(self):
        state = GaussianDensity([1.0, 2.0], np.diag([0.5, 0.8]))
        out = propagate_linear(state, np.eye(2), 1e-12 * np.eye(2))
        assert np.allclose(out.mean, state.mean)
        assert np.allclose(out.covariance, state.covariance, atol=1e-11)

    def test_scalar_hand_arithmetic(self):
        # P = 2, H = 3, R = 1 -> mean 3 mu, covariance 9*2 + 1 = 19
        state = GaussianDensity([1.5], [[2.0]])
        out = propagate_linear(state, [[3.0]], [[1.0]])
        assert out.mean[0] == pytest.approx(4.5)
        assert out.covariance[0, 0] == pytest.approx(19.0)

    def test_monte_carlo_agreement(self):
        gen = rng(3)
        state = GaussianDensity([0.5, -1.0, 2.0], np.diag([1.0, 2.0, 0.5]))
        H = np.array([[1.0, 1.0, 0.0], [0.0, 0.5, 2.0]])
        R = np.array([[0.3, 0.1], [0.1, 0.4]])
        out = propagate_linear(state, H, R)
        n = 100_000
        xs = np.array([sample(state, gen) for _ in range(n)])
        noise_d = GaussianDensity(np.zeros(2), R)
        zs = xs @ H.T + np.array([sample(noise_d, gen) for _ in range(n)])
        se_mean = np.sqrt(np.diag(out.covariance) / n)
        assert np.all(np.abs(zs.mean(axis=0) - out.mean) < 3 * se_mean)
        emp = np.cov(zs.T)
        for i in range(2):
            for j in range(2):
                se = math.sqrt(
                    (out.covariance[i, i] * out.covariance[j, j] + out.covariance[i, j] ** 2) / n
                )
                assert abs(emp[i, j] - out.covariance[i, j]) < 3 * se

    def test_composition_is_exact(self):
        state = GaussianDensity([1.0, -2.0], np.array([[1.2, 0.3], [0.3, 0.9]]))
        A = np.array([[2.0, 1.0], [0.0, 1.0]])
        B = np.array([[1.0, -1.0], [0.5, 0.5]])
        eps = 1e-15 * np.eye(2)
        two_step = propagate_linear(propagate_linear(state, A, eps), B, eps)
        one_step = propagate_linear(state, B @ A, eps)
        assert np.allclose(two_step.mean, one_step.mean, atol=1e-12)
        assert np.allclose(two_step.covariance, one_step.covariance, atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        state = GaussianDensity(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            propagate_linear(state, np.eye(3), np.eye(3))


class TestRandomSpd:
    @pytest.mark.parametrize("dim", [2, 4])
    def test_eigenvalues_are_drawn_diagonal(self, dim):
        gen = rng(11)
        probe = np.random.default_rng(11)
        lo, hi = 0.5, 3.0
        diag = probe.uniform(lo, hi, size=(1, dim))[0]
        mat = random_spd(RandomSpdSpec(dim, (lo, hi), gen))
        eig = np.sort(np.linalg.eigvalsh(mat))
        assert np.allclose(eig, np.sort(diag), atol=1e-9)
        assert abs(np.linalg.det(mat) - np.prod(diag)) < 1e-9 * np.prod(diag)

    def test_symmetry(self):
        gen = rng(2)
        for _ in range(50):
            mat = random_spd(RandomSpdSpec(4, (0.5, 5.0), gen))
            assert np.max(np.abs(mat - mat.T)) < 1e-12

    def test_validity_sweep_cholesky(self):
        gen = rng(9)
        for dim in (2, 4):
            mats = random_spd_batch(dim, (0.1, 10.0), gen, 10_000)
            np.linalg.cholesky(mats)  # raises if any draw is not SPD

    def test_per_dimension_ranges(self):
        gen = rng(4)
        ranges = ((1.0, 2.0), (1.0, 2.0), (5.0, 6.0), (5.0, 6.0))
        mat = random_spd(RandomSpdSpec(4, ranges, gen))
        eig = np.sort(np.linalg.eigvalsh(mat))
        assert np.all(eig[:2] >= 1.0 - 1e-9) and np.all(eig[:2] <= 2.0 + 1e-9)
        assert np.all(eig[2:] >= 5.0 - 1e-9) and np.all(eig[2:] <= 6.0 + 1e-9)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            RandomSpdSpec(3, (0.5, 1.0), rng(0))
        with pytest.raises(ValueError, match="lower"):
            RandomSpdSpec(2, (1.0, 0.5), rng(0))
        with pytest.raises(ValueError, match="lower"):
            RandomSpdSpec(2, (0.0, 0.5), rng(0))
