"""Joint-association hypotheses over one scan of detections.

Every detection is explained as exactly one of: a detected established
track, a false detection, or a new track; established tracks without a
detection are missed.  The log-probabilities of all joint hypotheses are
cast into an assignment matrix whose independent entry sets (no shared row
or column) enumerate the hypotheses, so an optimal assignment solver
recovers the most probable one.

Two matrix forms are provided: the full square (n_tracks + 2 n_detections)
matrix, and the reduced n_detections-row rectangular matrix obtained by
subtracting the missed-detection log-probability from the established-track
columns, dropping the resulting all-zero rows and forbidding the
off-diagonal entries of the false/new blocks.  Hypothesis scores in the two
forms differ by the constant n_tracks * ln(1 - P_D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .assignment import FORBIDDEN, Assignment, CostMatrix, maximize
from .gaussian import GaussianDensity, log_density, propagate_linear

__all__ = [
    "HypothesisParams",
    "ColumnKind",
    "ColumnLabel",
    "RowKind",
    "RowLabel",
    "HypothesisMatrix",
    "JointHypothesis",
    "build_full_matrix",
    "build_reduced_matrix",
    "score_hypothesis",
    "enumerate_hypotheses",
    "count_hypotheses",
    "best_hypothesis",
    "canonical_column_index",
]

# Combinatorial guard for exhaustive enumeration.
MAX_ENUMERATION_SIZE = 8


@dataclass(frozen=True)
class HypothesisParams:
    """Scan-level association parameters.

    beta_fd and beta_nt are the spatial densities (per unit measurement
    volume) of false detections and of new-track appearances; the new-track
    density is understood to already include the detection probability.
    measurement_volume is the arbitrary unit volume that makes densities
    dimensionless inside logarithms; it shifts all hypothesis scores equally
    and never changes their ordering.
    """

    detection_probability: float = 1.0
    beta_fd: float = 1.0
    beta_nt: float = 1.0
    measurement_volume: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.detection_probability <= 1.0):
            raise ValueError(
                f"detection_probability must be in (0, 1], got {self.detection_probability}"
            )
        if self.beta_fd <= 0 or self.beta_nt <= 0:
            raise ValueError("beta_fd and beta_nt must be positive densities")
        if self.measurement_volume <= 0:
            raise ValueError("measurement_volume must be positive")


class ColumnKind(Enum):
    ESTABLISHED_TRACK = "track"
    FALSE_TRACK = "false"
    NEW_TRACK = "new"


@dataclass(frozen=True)
class ColumnLabel:
    kind: ColumnKind
    index: int


class RowKind(Enum):
    DETECTION = "detection"
    MISSING_DETECTION = "missing"


@dataclass(frozen=True)
class RowLabel:
    kind: RowKind
    index: int


@dataclass(frozen=True)
class HypothesisMatrix:
    """Log-probability assignment matrix with labeled rows and columns.

    established_mandatory marks the P_D = 1 reduced form, where hypotheses
    leaving an established track undetected have probability zero and the
    solver must therefore cover every established-track column.
    """

    scores: np.ndarray
    forbidden: np.ndarray
    row_labels: tuple
    column_labels: tuple
    n_tracks: int
    n_detections: int
    form: str
    established_mandatory: bool = False

    def to_cost_matrix(self) -> CostMatrix:
        """Scores as a CostMatrix (use assignment.maximize on it)."""
        return CostMatrix(costs=self.scores, forbidden=self.forbidden)


@dataclass(frozen=True)
class JointHypothesis:
    """One joint association event: a column label per detection plus the
    derived index sets and the hypothesis log-score."""

    assignment: tuple
    detected_tracks: tuple
    missed_tracks: tuple
    false_detections: tuple
    new_tracks: tuple
    log_score: float

    @classmethod
    def from_labels(cls, labels, n_tracks: int, log_score: float) -> "JointHypothesis":
        labels = tuple(labels)
        detected = []
        false_d = []
        new_t = []
        for j, label in enumerate(labels):
            if label.kind is ColumnKind.ESTABLISHED_TRACK:
                if not (0 <= label.index < n_tracks):
                    raise ValueError(f"track index {label.index} out of range")
                detected.append(label.index)
            elif label.kind is ColumnKind.FALSE_TRACK:
                if label.index != j:
                    raise ValueError(
                        f"false-track label of detection {j} must carry its own index"
                    )
                false_d.append(j)
            else:
                if label.index != j:
                    raise ValueError(
                        f"new-track label of detection {j} must carry its own index"
                    )
                new_t.append(j)
        if len(set(detected)) != len(detected):
            raise ValueError("an established track may explain at most one detection")
        missed = tuple(i for i in range(n_tracks) if i not in detected)
        return cls(
            assignment=labels,
            detected_tracks=tuple(detected),
            missed_tracks=missed,
            false_detections=tuple(false_d),
            new_tracks=tuple(new_t),
            log_score=log_score,
        )


def canonical_column_index(label: ColumnLabel, n_tracks: int, n_detections: int) -> int:
    """Column position of a label in the (tracks | false | new) layout."""
    if label.kind is ColumnKind.ESTABLISHED_TRACK:
        return label.index
    if label.kind is ColumnKind.FALSE_TRACK:
        return n_tracks + label.index
    return n_tracks + n_detections + label.index


def _column_labels(n_tracks: int, n_detections: int) -> tuple:
    labels = [ColumnLabel(ColumnKind.ESTABLISHED_TRACK, i) for i in range(n_tracks)]
    labels += [ColumnLabel(ColumnKind.FALSE_TRACK, j) for j in range(n_detections)]
    labels += [ColumnLabel(ColumnKind.NEW_TRACK, j) for j in range(n_detections)]
    return tuple(labels)


def _check_inputs(tracks, models, measurements):
    if len(models) != len(tracks):
        raise ValueError(
            f"need one measurement model per track, got {len(models)} for {len(tracks)}"
        )
    for z, R in measurements:
        z = np.asarray(z, dtype=float)
        R = np.asarray(R, dtype=float)
        if z.ndim != 1 or R.shape != (z.shape[0], z.shape[0]):
            raise ValueError("each measurement is a vector with a matching noise matrix")


def _detection_track_score(track: GaussianDensity, model, z, R, params) -> float:
    """ln( N(z; H x, H P H' + R) * V_z * P_D ) for one pairing."""
    predicted = propagate_linear(track, model.H, R)
    return (
        log_density(z, predicted)
        + math.log(params.measurement_volume)
        + math.log(params.detection_probability)
    )


def build_full_matrix(tracks, models, measurements, params: HypothesisParams) -> HypothesisMatrix:
    """Full square log-probability matrix over all detections and columns.

    Rows: the detections, then one missing-detection row per track and per
    detection (the latter make the matrix square so every column is covered).
    Requires P_D < 1; at P_D = 1 the missing-detection entries diverge and
    the reduced form must be used.
    """
    _check_inputs(tracks, models, measurements)
    if params.detection_probability >= 1.0:
        raise ValueError(
            "full matrix needs detection_probability < 1; "
            "use build_reduced_matrix at P_D = 1"
        )
    n_t = len(tracks)
    n_d = len(measurements)
    size = n_t + 2 * n_d
    scores = np.zeros((size, size))
    ln_v = math.log(params.measurement_volume)
    ln_fd = math.log(params.beta_fd) + ln_v
    ln_nt = math.log(params.beta_nt) + ln_v
    ln_miss = math.log(1.0 - params.detection_probability)

    for j, (z, R) in enumerate(measurements):
        for i, (track, model) in enumerate(zip(tracks, models)):
            scores[j, i] = _detection_track_score(track, model, z, R, params)
        scores[j, n_t : n_t + n_d] = ln_fd
        scores[j, n_t + n_d :] = ln_nt
    scores[n_d:, :n_t] = ln_miss

    row_labels = tuple(
        [RowLabel(RowKind.DETECTION, j) for j in range(n_d)]
        + [RowLabel(RowKind.MISSING_DETECTION, k) for k in range(n_t + n_d)]
    )
    return HypothesisMatrix(
        scores=scores,
        forbidden=np.zeros((size, size), dtype=bool),
        row_labels=row_labels,
        column_labels=_column_labels(n_t, n_d),
        n_tracks=n_t,
        n_detections=n_d,
        form="full",
    )


def build_reduced_matrix(tracks, models, measurements, params: HypothesisParams) -> HypothesisMatrix:
    """Rectangular n_detections x (n_tracks + 2 n_detections) matrix.

    Established-track entries carry the missed-detection log-probability
    subtracted out (a per-hypothesis constant), and the false/new blocks are
    diagonal with forbidden off-diagonal entries.  Valid at P_D = 1, where
    established columns become mandatory.
    """
    _check_inputs(tracks, models, measurements)
    n_t = len(tracks)
    n_d = len(measurements)
    p_d = params.detection_probability
    scores = np.zeros((n_d, n_t + 2 * n_d))
    forbidden = np.zeros((n_d, n_t + 2 * n_d), dtype=bool)
    forbidden[:, n_t:] = True
    ln_v = math.log(params.measurement_volume)
    ln_miss = math.log(1.0 - p_d) if p_d < 1.0 else 0.0

    for j, (z, R) in enumerate(measurements):
        for i, (track, model) in enumerate(zip(tracks, models)):
            scores[j, i] = _detection_track_score(track, model, z, R, params) - ln_miss
        scores[j, n_t + j] = math.log(params.beta_fd) + ln_v
        scores[j, n_t + n_d + j] = math.log(params.beta_nt) + ln_v
        forbidden[j, n_t + j] = False
        forbidden[j, n_t + n_d + j] = False

    row_labels = tuple(RowLabel(RowKind.DETECTION, j) for j in range(n_d))
    return HypothesisMatrix(
        scores=scores,
        forbidden=forbidden,
        row_labels=row_labels,
        column_labels=_column_labels(n_t, n_d),
        n_tracks=n_t,
        n_detections=n_d,
        form="reduced",
        established_mandatory=(p_d == 1.0),
    )


def score_hypothesis(hyp, params: HypothesisParams, tracks, models, measurements) -> float:
    """Log of the joint association probability, up to the normalization
    constant shared by all hypotheses of one scan.

    Sums, over detections explained by tracks, the predicted-measurement
    log-density plus ln(V_z P_D); missed tracks contribute ln(1 - P_D)
    (negative infinity at P_D = 1), false detections ln(beta_fd V_z) and new
    tracks ln(beta_nt V_z).
    """
    labels = hyp.assignment if isinstance(hyp, JointHypothesis) else tuple(hyp)
    _check_inputs(tracks, models, measurements)
    if len(labels) != len(measurements):
        raise ValueError("need exactly one column label per detection")
    structured = JointHypothesis.from_labels(labels, len(tracks), 0.0)

    ln_v = math.log(params.measurement_volume)
    total = 0.0
    for j, label in enumerate(labels):
        z, R = measurements[j]
        if label.kind is ColumnKind.ESTABLISHED_TRACK:
            i = label.index
            total += _detection_track_score(tracks[i], models[i], z, R, params)
        elif label.kind is ColumnKind.FALSE_TRACK:
            total += math.log(params.beta_fd) + ln_v
        else:
            total += math.log(params.beta_nt) + ln_v
    n_missed = len(structured.missed_tracks)
    if n_missed:
        if params.detection_probability == 1.0:
            return -math.inf
        total += n_missed * math.log(1.0 - params.detection_probability)
    return total


def count_hypotheses(n_tracks: int, n_detections: int) -> int:
    """Number of distinct joint hypotheses, by exact integer combinatorics.

    Sums over the number of detected tracks and of false detections the ways
    to pick which detections explain which tracks and which of the rest are
    false; the remaining detections are new tracks.
    """
    if n_tracks < 0 or n_detections < 0:
        raise ValueError("track and detection counts must be non-negative")
    total = 0
    for n_dt in range(min(n_detections, n_tracks) + 1):
        for n_fd in range(n_detections - n_dt + 1):
            total += (
                math.comb(n_detections, n_dt)
                * math.comb(n_detections - n_dt, n_fd)
                * math.perm(n_tracks, n_dt)
            )
    if total >= 2**63:
        raise OverflowError(f"hypothesis count {total} exceeds 64-bit range")
    return total


def enumerate_hypotheses(n_tracks: int, n_detections: int, scorer) -> list:
    """All distinct joint hypotheses, scored and sorted best-first.

    scorer maps a tuple of per-detection ColumnLabels to a log-score.  Ties
    are broken toward the lexicographically smallest column-index sequence,
    matching the assignment solver's tie rule.  Guarded to
    n_tracks + n_detections <= 8.
    """
    if n_tracks + n_detections > MAX_ENUMERATION_SIZE:
        raise ValueError(
            f"enumeration guard: n_tracks + n_detections must be <= {MAX_ENUMERATION_SIZE}"
        )

    hypotheses = []

    def extend(j, used_tracks, labels):
        if j == n_detections:
            labels = tuple(labels)
            score = scorer(labels)
            hypotheses.append(JointHypothesis.from_labels(labels, n_tracks, score))
            return
        for i in range(n_tracks):
            if i not in used_tracks:
                labels.append(ColumnLabel(ColumnKind.ESTABLISHED_TRACK, i))
                used_tracks.add(i)
                extend(j + 1, used_tracks, labels)
                used_tracks.discard(i)
                labels.pop()
        for kind in (ColumnKind.FALSE_TRACK, ColumnKind.NEW_TRACK):
            labels.append(ColumnLabel(kind, j))
            extend(j + 1, used_tracks, labels)
            labels.pop()

    extend(0, set(), [])

    def sort_key(h):
        key = tuple(
            canonical_column_index(label, n_tracks, n_detections)
            for label in h.assignment
        )
        return (-h.log_score, key)

    hypotheses.sort(key=sort_key)
    return hypotheses


def best_hypothesis(matrix: HypothesisMatrix):
    """Most probable hypothesis of a HypothesisMatrix via optimal assignment.

    Returns (labels, assignment): the per-detection column labels of the
    winning hypothesis and the underlying solver result.  For the P_D = 1
    reduced form the matrix is squared up with padding rows that are
    forbidden on established-track columns, so every track must be detected.
    """
    n_t, n_d = matrix.n_tracks, matrix.n_detections
    if matrix.established_mandatory:
        size = n_t + 2 * n_d
        scores = np.zeros((size, size))
        forbidden = np.zeros((size, size), dtype=bool)
        scores[:n_d] = matrix.scores
        forbidden[:n_d] = matrix.forbidden
        forbidden[n_d:, :n_t] = True
        cost = CostMatrix(costs=scores, forbidden=forbidden)
    else:
        cost = matrix.to_cost_matrix()
    best = maximize(cost)
    labels = tuple(matrix.column_labels[best.row_to_col[j]] for j in range(n_d))
    return labels, best
