"""Association distances between measurements and predicted-measurement
densities.

Three variants are supported: the plain (squared) Mahalanobis distance, the
association log-likelihood distance

    d2 = d'S^-1 d + ln|S| + n ln(2 pi) - 2 ln(P_D)

which is -2 times the log of the association likelihood, and the same
quantity without the dimension term n ln(2 pi).  The unit measurement
volume that makes the likelihood dimensionless is fixed to 1, so its
logarithm never appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular

from .gaussian import _as_covariance, _cholesky_lower

__all__ = [
    "DistanceKind",
    "DistanceContext",
    "mahalanobis_sq",
    "generalized_mahalanobis_sq",
    "asso_ll_sq",
]


class DistanceKind(Enum):
    MAHALANOBIS = "maha"
    ASSOCIATION_LOG_LIKELIHOOD = "asso-ll"
    ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM = "asso-ll-no-dim"


@dataclass(frozen=True)
class DistanceContext:
    """Scalar context shared by all pairings of one association problem.

    measurement_volume is the unit volume convention and must stay 1; general
    volumes are handled (and shown to be ordering-irrelevant) at the
    hypothesis-matrix level.
    """

    detection_probability: float = 1.0
    measurement_volume: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.detection_probability <= 1.0):
            raise ValueError(
                f"detection_probability must be in (0, 1], got {self.detection_probability}"
            )
        if self.measurement_volume != 1.0:
            raise ValueError("measurement_volume is fixed to 1 by convention")


def _chol_pieces(delta, sigma):
    """Quadratic form and log-determinant via one Cholesky factorization."""
    d = np.asarray(delta, dtype=float).reshape(-1)
    S = _as_covariance(sigma, "sigma")
    if d.shape[0] != S.shape[0]:
        raise ValueError(
            f"delta dimension {d.shape[0]} does not match sigma dimension {S.shape[0]}"
        )
    chol = _cholesky_lower(S, "sigma")
    y = solve_triangular(chol, d, lower=True)
    quad = float(y @ y)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return quad, log_det, d.shape[0]


def mahalanobis_sq(delta, sigma) -> float:
    """Squared Mahalanobis distance d' S^-1 d, via Cholesky solve."""
    quad, _, _ = _chol_pieces(delta, sigma)
    return quad


def generalized_mahalanobis_sq(mu1, sigma1, mu2, sigma2) -> float:
    """Squared distance between two Gaussians: (m1-m2)'(S1+S2)^-1(m1-m2)."""
    m1 = np.asarray(mu1, dtype=float).reshape(-1)
    m2 = np.asarray(mu2, dtype=float).reshape(-1)
    if m1.shape != m2.shape:
        raise ValueError(f"mean dimensions differ: {m1.shape[0]} vs {m2.shape[0]}")
    S1 = _as_covariance(sigma1, "sigma1")
    S2 = _as_covariance(sigma2, "sigma2")
    if S1.shape != S2.shape or S1.shape[0] != m1.shape[0]:
        raise ValueError("covariance dimensions do not match the means")
    return mahalanobis_sq(m1 - m2, S1 + S2)


def asso_ll_sq(delta, sigma, ctx: DistanceContext, kind: DistanceKind) -> float:
    """Association distance of the requested kind.

    For the plain Mahalanobis kind the likelihood terms are omitted entirely.
    The full association log-likelihood variant equals
    -2 (log_density(delta; 0, sigma) + ln P_D) exactly.  The measurement
    dimension n is read from delta, so mixed-dimension pairings need no
    configuration.
    """
    quad, log_det, n = _chol_pieces(delta, sigma)
    if kind is DistanceKind.MAHALANOBIS:
        return quad
    d2 = quad + log_det - 2.0 * math.log(ctx.detection_probability)
    if kind is DistanceKind.ASSOCIATION_LOG_LIKELIHOOD:
        d2 += n * math.log(2.0 * math.pi)
    elif kind is not DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM:
        raise ValueError(f"unknown distance kind {kind!r}")
    return d2
