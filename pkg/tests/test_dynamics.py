import math

import numpy as np
import pytest

from assocbench.dynamics import (
    MeasurementModel,
    RiccatiNonConvergenceError,
    make_model,
    solve_dare_fixed_point,
    solve_dare_fixed_point_batch,
    steady_state_predicted_cov,
    steady_state_predicted_cov_batch,
)
from assocbench.gaussian import random_spd_batch


def dare_rhs(F, G, H, V, R, P):
    F, G, H, V, R = map(np.atleast_2d, (F, G, H, V, R))
    S = H @ P @ H.T + R
    return F @ P @ F.T - F @ P @ H.T @ np.linalg.inv(S) @ H @ P @ F.T + G @ V @ G.T


class TestKinematicModel:
    def test_unit_dt_entries(self):
        model = make_model(1.0)
        assert model.F[0, 2] == 1.0
        assert model.G[0, 0] == 0.5

    def test_small_dt_noise_gain(self):
        model = make_model(0.1)
        expected = np.array([[0.005, 0.0], [0.0, 0.005], [0.1, 0.0], [0.0, 0.1]])
        assert np.array_equal(model.G, expected)

    def test_transition_semigroup(self):
        f1 = make_model(0.3).F
        f2 = make_model(0.45).F
        assert np.allclose(f1 @ f2, make_model(0.75).F, atol=1e-15)

    def test_non_positive_dt_rejected(self):
        with pytest.raises(ValueError, match="dt"):
            make_model(0.0)


class TestMeasurementModel:
    def test_exact_entries(self):
        assert np.array_equal(
            MeasurementModel.h1().H, [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        )
        assert np.array_equal(
            MeasurementModel.h2().H, [[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        )
        assert np.array_equal(MeasurementModel.h11().H, [[1.0, 0.0, 0.0, 0.0]])

    def test_h11_is_first_row_of_h1(self):
        assert np.array_equal(MeasurementModel.h11().H, MeasurementModel.h1().H[:1])

    def test_lookup_by_label(self):
        assert MeasurementModel.by_label("H2").label == "H2"
        with pytest.raises(ValueError, match="unknown"):
            MeasurementModel.by_label("H3")


class TestRiccati:
    def test_scalar_closed_form(self):
        # F = G = H = 1, V = R = 1: fixed point is the golden ratio.
        P = solve_dare_fixed_point(1.0, 1.0, 1.0, 1.0, 1.0)
        assert abs(P.item() - (1 + math.sqrt(5)) / 2) < 1e-9

    def test_residual_below_tolerance(self):
        gen = np.random.default_rng(0)
        model = make_model(1.0)
        meas = MeasurementModel.h1()
        for _ in range(20):
            V = random_spd_batch(2, (0.25, 4.0), gen, 1)[0]
            R = random_spd_batch(2, (0.5, 10.0), gen, 1)[0]
            P = steady_state_predicted_cov(model, meas, V, R)
            residual = np.linalg.norm(dare_rhs(model.F, model.G, meas.H, V, R, P) - P, "fro")
            assert residual < 1e-9
            np.linalg.cholesky(P)  # symmetric positive definite

    def test_vanishing_process_noise_limit(self):
        # V -> 0 with every mode observed: steady covariance collapses.
        model = make_model(1.0)
        meas = MeasurementModel.h1()
        P = steady_state_predicted_cov(model, meas, 1e-8 * np.eye(2), np.eye(2))
        assert np.linalg.norm(P, "fro") < 1e-3

    def test_initialization_invariance(self):
        gen = np.random.default_rng(3)
        model = make_model(1.0)
        meas = MeasurementModel.h2()
        V = random_spd_batch(2, (0.25, 4.0), gen, 1)[0]
        R = random_spd_batch(2, (0.5, 10.0), gen, 1)[0]
        from_gvg = solve_dare_fixed_point(model.F, model.G, meas.H, V, R)
        from_eye = solve_dare_fixed_point(model.F, model.G, meas.H, V, R, initial=np.eye(4))
        assert np.linalg.norm(from_gvg - from_eye, "fro") < 1e-7

    def test_symmetry_of_result(self):
        gen = np.random.default_rng(4)
        model = make_model(1.0)
        meas = MeasurementModel.h1()
        V = random_spd_batch(2, (0.25, 4.0), gen, 1)[0]
        R = random_spd_batch(2, (0.5, 10.0), gen, 1)[0]
        P = steady_state_predicted_cov(model, meas, V, R)
        assert np.max(np.abs(P - P.T)) < 1e-12

    def test_monotone_residual_tail(self):
        model = make_model(1.0)
        meas = MeasurementModel.h1()
        _, history = solve_dare_fixed_point(
            model.F, model.G, meas.H, np.eye(2), np.eye(2), return_info=True
        )
        tail = history[-10:]
        assert all(b < a for a, b in zip(tail, tail[1:]))

    def test_non_convergence_reports_residual(self):
        with pytest.raises(RiccatiNonConvergenceError) as info:
            solve_dare_fixed_point(1.0, 1.0, 1.0, 1.0, 1.0, max_iterations=2)
        assert info.value.residual > 0
        with pytest.raises(RiccatiNonConvergenceError):
            solve_dare_fixed_point_batch(
                np.eye(1), np.eye(1), np.eye(1), np.ones((1, 1, 1)), np.ones((1, 1, 1)),
                max_iterations=2,
            )

    def test_batch_matches_scalar_path(self):
        gen = np.random.default_rng(8)
        model = make_model(1.0)
        for meas in (MeasurementModel.h1(), MeasurementModel.h2()):
            V = random_spd_batch(2, (0.25, 4.0), gen, 16)
            R = random_spd_batch(2, (0.5, 10.0), gen, 16)
            batch = steady_state_predicted_cov_batch(model, meas, V, R)
            for k in range(16):
                single = steady_state_predicted_cov(model, meas, V[k], R[k])
                assert np.linalg.norm(batch[k] - single, "fro") < 1e-8

    def test_input_validation(self):
        model = make_model(1.0)
        with pytest.raises(ValueError, match="measurement noise"):
            steady_state_predicted_cov(model, MeasurementModel.h1(), np.eye(2), np.eye(3))
        with pytest.raises(ValueError, match="process noise"):
            steady_state_predicted_cov(model, MeasurementModel.h1(), np.eye(3), np.eye(2))
