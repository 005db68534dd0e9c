"""White-noise-acceleration kinematics and the steady-state Riccati solver.

State is (x, y, vx, vy).  The predicted-state covariance at steady state is
the fixed point of the discrete algebraic Riccati map

    P <- F P F' - F P H' (H P H' + R)^-1 H P F' + G V G'

solved here by direct fixed-point iteration (adequate at 4x4 and free of any
eigensolver dependency).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import _as_covariance

__all__ = [
    "KinematicModel",
    "MeasurementModel",
    "StateVector",
    "RiccatiNonConvergenceError",
    "make_model",
    "solve_dare_fixed_point",
    "solve_dare_fixed_point_batch",
    "steady_state_predicted_cov",
    "steady_state_predicted_cov_batch",
]

DEFAULT_DT = 0.1

# Fixed-point stop on the Frobenius norm of successive iterates.  Chosen a
# decade below the 1e-9 residual contract so the returned matrix also meets
# the cross-initialization agreement bound.
DEFAULT_STEP_TOL = 1e-10
DEFAULT_MAX_ITERATIONS = 10_000


class RiccatiNonConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance; carries the residual."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"Riccati iteration did not converge in {iterations} iterations "
            f"(final step residual {residual:.3e})"
        )


@dataclass(frozen=True)
class StateVector:
    """Planar position/velocity state."""

    x: float
    y: float
    vx: float
    vy: float

    @classmethod
    def from_array(cls, arr) -> "StateVector":
        x, y, vx, vy = np.asarray(arr, dtype=float).reshape(4)
        return cls(x, y, vx, vy)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])


@dataclass(frozen=True)
class KinematicModel:
    """Discrete white-noise-acceleration model: x+ = F x + G nu."""

    dt: float
    F: np.ndarray
    G: np.ndarray
    label: str = "white-noise-acceleration"


def make_model(dt: float) -> KinematicModel:
    """Build the constant-velocity transition and noise-gain matrices for dt."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    G = np.array(
        [
            [dt * dt / 2.0, 0.0],
            [0.0, dt * dt / 2.0],
            [dt, 0.0],
            [0.0, dt],
        ]
    )
    return KinematicModel(dt=dt, F=F, G=G)


@dataclass(frozen=True)
class MeasurementModel:
    """Linear output model z = H x.  H1/H2 are planar 2-D outputs; H11 is the
    single-row position output used in mixed-dimension scenarios."""

    H: np.ndarray
    label: str

    @property
    def dimension(self) -> int:
        return self.H.shape[0]

    @classmethod
    def h1(cls) -> "MeasurementModel":
        return cls(H=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]), label="H1")

    @classmethod
    def h2(cls) -> "MeasurementModel":
        return cls(H=np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]), label="H2")

    @classmethod
    def h11(cls) -> "MeasurementModel":
        return cls(H=np.array([[1.0, 0.0, 0.0, 0.0]]), label="H11")

    @classmethod
    def by_label(cls, label: str) -> "MeasurementModel":
        table = {"H1": cls.h1, "H2": cls.h2, "H11": cls.h11}
        try:
            return table[label]()
        except KeyError:
            raise ValueError(f"unknown measurement model label {label!r}") from None


def solve_dare_fixed_point_batch(
    F: np.ndarray,
    G: np.ndarray,
    H: np.ndarray,
    V: np.ndarray,
    R: np.ndarray,
    step_tol: float = DEFAULT_STEP_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
):
    """Solve a stack of Riccati fixed points sharing F, G, H.

    V is (B, q, q), R is (B, m, m).  Starts from P0 = G V G', symmetrizes
    every iterate, and freezes each problem once its step norm drops below
    step_tol.  Returns (P, iterations, step_norms) with P of shape
    (B, n, n).  Raises RiccatiNonConvergenceError naming the worst residual
    if any problem fails to converge.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    V = np.asarray(V, dtype=float)
    R = np.asarray(R, dtype=float)
    batch = V.shape[0]
    n = F.shape[0]
    m = H.shape[0]

    Ht = H.T
    Ft = F.T
    GVGt = np.einsum("ij,bjk,lk->bil", G, V, G)

    P_out = np.empty((batch, n, n))
    iters_out = np.zeros(batch, dtype=int)
    steps_out = np.full(batch, np.inf)

    active = np.arange(batch)
    P = GVGt.copy()
    R_act = R
    GVGt_act = GVGt

    for iteration in range(1, max_iterations + 1):
        PHt = P @ Ht                                   # (b, n, m)
        S = H @ PHt + R_act                            # (b, m, m)
        if m == 1:
            S_inv = 1.0 / S
        elif m == 2:
            det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
            S_inv = np.empty_like(S)
            S_inv[:, 0, 0] = S[:, 1, 1]
            S_inv[:, 1, 1] = S[:, 0, 0]
            S_inv[:, 0, 1] = -S[:, 0, 1]
            S_inv[:, 1, 0] = -S[:, 1, 0]
            S_inv /= det[:, None, None]
        else:
            S_inv = np.linalg.inv(S)
        K = PHt @ S_inv                                # (b, n, m)
        inner = P - K @ np.transpose(PHt, (0, 2, 1))   # P - P H' S^-1 H P
        P_next = F @ inner @ Ft + GVGt_act
        P_next = 0.5 * (P_next + np.transpose(P_next, (0, 2, 1)))

        step = np.sqrt(np.sum((P_next - P) ** 2, axis=(1, 2)))
        done = step < step_tol
        if np.any(done):
            idx = active[done]
            P_out[idx] = P_next[done]
            iters_out[idx] = iteration
            steps_out[idx] = step[done]
            keep = ~done
            if not np.any(keep):
                return P_out, iters_out, steps_out
            active = active[keep]
            P = P_next[keep]
            R_act = R_act[keep]
            GVGt_act = GVGt_act[keep]
            step = step[keep]
        else:
            P = P_next

    raise RiccatiNonConvergenceError(max_iterations, float(step.max()))


def solve_dare_fixed_point(
    F: np.ndarray,
    G: np.ndarray,
    H: np.ndarray,
    V: np.ndarray,
    R: np.ndarray,
    step_tol: float = DEFAULT_STEP_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    initial: np.ndarray | None = None,
    return_info: bool = False,
):
    """Solve one Riccati fixed point for general matrices.

    Accepts any consistent shapes (the scalar analogue included); ``initial``
    overrides the default G V G' starting point.  With return_info=True also
    returns the per-iteration step-norm history.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))

    P = G @ V @ G.T if initial is None else np.array(initial, dtype=float)
    history = []
    for iteration in range(1, max_iterations + 1):
        PHt = P @ H.T
        S = H @ PHt + R
        S_chol = np.linalg.cholesky(S)
        K = np.linalg.solve(S_chol.T, np.linalg.solve(S_chol, PHt.T)).T
        P_next = F @ (P - K @ PHt.T) @ F.T + G @ V @ G.T
        P_next = 0.5 * (P_next + P_next.T)
        step = float(np.linalg.norm(P_next - P, "fro"))
        history.append(step)
        P = P_next
        if step < step_tol:
            if return_info:
                return P, history
            return P
    raise RiccatiNonConvergenceError(max_iterations, history[-1])


def steady_state_predicted_cov(
    model: KinematicModel,
    measurement: MeasurementModel,
    V: np.ndarray,
    R: np.ndarray,
    step_tol: float = DEFAULT_STEP_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> np.ndarray:
    """Steady-state predicted covariance for one track's noise pair (V, R)."""
    V = _as_covariance(V, "V")
    R = _as_covariance(R, "R")
    if V.shape[0] != model.G.shape[1]:
        raise ValueError(f"process noise dimension {V.shape[0]} does not match G")
    if R.shape[0] != measurement.dimension:
        raise ValueError(
            f"measurement noise dimension {R.shape[0]} does not match "
            f"model {measurement.label}"
        )
    return solve_dare_fixed_point(
        model.F, model.G, measurement.H, V, R,
        step_tol=step_tol, max_iterations=max_iterations,
    )


def steady_state_predicted_cov_batch(
    model: KinematicModel,
    measurement: MeasurementModel,
    V: np.ndarray,
    R: np.ndarray,
    step_tol: float = DEFAULT_STEP_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> np.ndarray:
    """Batched steady_state_predicted_cov over stacked (V, R) pairs."""
    P, _, _ = solve_dare_fixed_point_batch(
        model.F, model.G, measurement.H, V, R,
        step_tol=step_tol, max_iterations=max_iterations,
    )
    return P
