"""Measurement-to-track association toolkit and Monte-Carlo benchmark."""

__version__ = "0.1.0"

from .assignment import FORBIDDEN, Assignment, CostMatrix, InfeasibleAssignmentError
from .distance import DistanceContext, DistanceKind
from .dynamics import KinematicModel, MeasurementModel, StateVector
from .gaussian import GaussianDensity, RandomSpdSpec
from .hypothesis import HypothesisMatrix, HypothesisParams, JointHypothesis
from .simulation import (
    BatchSummary,
    CovarianceRegime,
    MeasurementPolicy,
    Scenario,
    ScenarioConfig,
    ScenarioResult,
)

__all__ = [
    "__version__",
    "FORBIDDEN",
    "Assignment",
    "CostMatrix",
    "InfeasibleAssignmentError",
    "DistanceContext",
    "DistanceKind",
    "KinematicModel",
    "MeasurementModel",
    "StateVector",
    "GaussianDensity",
    "RandomSpdSpec",
    "HypothesisMatrix",
    "HypothesisParams",
    "JointHypothesis",
    "BatchSummary",
    "CovarianceRegime",
    "MeasurementPolicy",
    "Scenario",
    "ScenarioConfig",
    "ScenarioResult",
]
