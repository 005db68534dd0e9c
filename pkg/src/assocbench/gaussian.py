"""Multivariate Gaussian densities and random SPD covariance generation.

All covariance handling goes through Cholesky factorizations; a matrix that
fails to factorize is rejected instead of being silently regularized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "GaussianDensity",
    "RandomSpdSpec",
    "log_density",
    "sample",
    "propagate_linear",
    "random_spd",
    "random_spd_batch",
]

# Symmetry tolerance for accepting a covariance matrix, per entry.
SYMMETRY_ATOL = 1e-10

# Dense, tiny matrices only; anything larger is outside this package's scope.
MAX_DIMENSION = 10

# Coordinate pairs rotated in the 4-D random-covariance construction,
# in the fixed order the angles are consumed from the stream.
_GIVENS_PAIRS_4D = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def _as_covariance(matrix: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Validate and return a symmetric positive-definite matrix as float64."""
    cov = np.asarray(matrix, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {cov.shape}")
    if cov.shape[0] > MAX_DIMENSION:
        raise ValueError(
            f"{name} dimension {cov.shape[0]} exceeds supported maximum {MAX_DIMENSION}"
        )
    if not np.all(np.abs(cov - cov.T) <= SYMMETRY_ATOL):
        raise ValueError(f"{name} is not symmetric within {SYMMETRY_ATOL}")
    return cov


def _cholesky_lower(cov: np.ndarray, name: str = "covariance") -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc


@dataclass(frozen=True)
class GaussianDensity:
    """A multivariate Gaussian, the carrier of tracks, measurements and
    predicted-measurement densities.

    Attributes:
        mean: mean vector, length n.
        covariance: n x n symmetric positive-definite matrix.
    """

    mean: np.ndarray
    covariance: np.ndarray
    _chol_lower: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = _as_covariance(self.covariance)
        if mean.shape[0] != cov.shape[0]:
            raise ValueError(
                f"mean dimension {mean.shape[0]} does not match "
                f"covariance dimension {cov.shape[0]}"
            )
        chol = _cholesky_lower(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol_lower", chol)

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class RandomSpdSpec:
    """Recipe for a random SPD matrix: uniform diagonal, uniform rotation.

    diagonal_range is either one (lower, upper) pair applied to every
    diagonal entry or a per-dimension sequence of pairs.  rng_stream is a
    numpy Generator; callers keep disjoint streams for reproducibility.
    """

    dimension: int
    diagonal_range: tuple
    rng_stream: np.random.Generator

    def __post_init__(self):
        if self.dimension not in (2, 4):
            raise ValueError(f"dimension must be 2 or 4, got {self.dimension}")
        ranges = normalize_ranges(self.diagonal_range, self.dimension)
        object.__setattr__(self, "diagonal_range", ranges)


def normalize_ranges(diagonal_range, dimension: int) -> tuple:
    """Return diagonal_range as a tuple of per-dimension (lower, upper) pairs."""
    seq = tuple(diagonal_range)
    if len(seq) == 2 and np.isscalar(seq[0]):
        seq = tuple((float(seq[0]), float(seq[1])) for _ in range(dimension))
    else:
        seq = tuple((float(lo), float(hi)) for lo, hi in seq)
    if len(seq) != dimension:
        raise ValueError(
            f"need one diagonal range or {dimension} per-dimension ranges, got {len(seq)}"
        )
    for lo, hi in seq:
        if not (0.0 < lo < hi):
            raise ValueError(f"diagonal range must satisfy 0 < lower < upper, got ({lo}, {hi})")
    return seq


def log_density(point: Sequence[float], density: GaussianDensity) -> float:
    """Log of the Gaussian density at ``point`` (times unit volume).

    Evaluates ln N(point; mean, cov) = -1/2 d'C^-1 d - 1/2 ln|2 pi C| through
    the cached Cholesky factor; no explicit matrix inverse is formed.
    """
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.shape[0] != density.dimension:
        raise ValueError(
            f"point dimension {x.shape[0]} does not match density dimension {density.dimension}"
        )
    chol = density._chol_lower
    y = solve_triangular(chol, x - density.mean, lower=True)
    quad = float(y @ y)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    n = density.dimension
    return -0.5 * quad - 0.5 * (n * np.log(2.0 * np.pi) + log_det)


def sample(density: GaussianDensity, rng_stream: np.random.Generator) -> np.ndarray:
    """Draw one sample: mean + L w with L the lower Cholesky factor.

    Deterministic given the stream state; w consumes exactly ``dimension``
    standard-normal variates.
    """
    w = rng_stream.standard_normal(density.dimension)
    return density.mean + density._chol_lower @ w


def propagate_linear(
    state: GaussianDensity, H: np.ndarray, noise_cov: np.ndarray
) -> GaussianDensity:
    """Push a Gaussian through z = H x + r with r ~ N(0, noise_cov).

    Returns N(H mean, H P H' + R), the predicted-measurement density of a
    linearly observed state.  Exact for linear maps.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != state.dimension:
        raise ValueError(
            f"output matrix shape {H.shape} does not map state dimension {state.dimension}"
        )
    R = _as_covariance(noise_cov, "noise_cov")
    if R.shape[0] != H.shape[0]:
        raise ValueError(
            f"noise_cov dimension {R.shape[0]} does not match output dimension {H.shape[0]}"
        )
    mean = H @ state.mean
    cov = H @ state.covariance @ H.T + R
    cov = 0.5 * (cov + cov.T)
    return GaussianDensity(mean, cov)


def _rotation_batch(angles: np.ndarray, dimension: int) -> np.ndarray:
    """Stack of rotation matrices from per-matrix angle draws.

    2-D: one plane rotation.  4-D: product of Givens rotations over the six
    coordinate pairs in fixed order, one independent angle each.
    """
    if dimension == 2:
        c = np.cos(angles[:, 0])
        s = np.sin(angles[:, 0])
        q = np.empty((angles.shape[0], 2, 2))
        q[:, 0, 0] = c
        q[:, 0, 1] = -s
        q[:, 1, 0] = s
        q[:, 1, 1] = c
        return q
    q = np.broadcast_to(np.eye(4), (angles.shape[0], 4, 4)).copy()
    for k, (p, r) in enumerate(_GIVENS_PAIRS_4D):
        c = np.cos(angles[:, k])
        s = np.sin(angles[:, k])
        g = np.broadcast_to(np.eye(4), (angles.shape[0], 4, 4)).copy()
        g[:, p, p] = c
        g[:, p, r] = -s
        g[:, r, p] = s
        g[:, r, r] = c
        q = q @ g
    return q


def random_spd_batch(
    dimension: int,
    diagonal_range,
    rng_stream: np.random.Generator,
    size: int,
) -> np.ndarray:
    """Draw ``size`` random SPD matrices sharing one stream.

    Consumes, in order: a (size, dimension) block of uniform diagonal draws,
    then a (size, n_angles) block of uniform angles in [0, 2 pi).  Returns a
    (size, dimension, dimension) stack Q diag(d) Q'.
    """
    if dimension not in (2, 4):
        raise ValueError(f"dimension must be 2 or 4, got {dimension}")
    ranges = normalize_ranges(diagonal_range, dimension)
    lo = np.array([r[0] for r in ranges])
    hi = np.array([r[1] for r in ranges])
    diag = rng_stream.uniform(lo, hi, size=(size, dimension))
    n_angles = 1 if dimension == 2 else len(_GIVENS_PAIRS_4D)
    angles = rng_stream.uniform(0.0, 2.0 * np.pi, size=(size, n_angles))
    q = _rotation_batch(angles, dimension)
    out = np.einsum("bij,bj,bkj->bik", q, diag, q)
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def random_spd(spec: RandomSpdSpec) -> np.ndarray:
    """Draw one random SPD matrix per ``spec`` (uniform diagonal, rotated)."""
    return random_spd_batch(
        spec.dimension, spec.diagonal_range, spec.rng_stream, size=1
    )[0]
