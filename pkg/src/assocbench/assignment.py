"""Optimal linear assignment over cost matrices with forbidden entries.

The solver is an O(n^3) Hungarian algorithm (shortest augmenting paths with
potentials).  Rectangular inputs (rows <= cols, every row must be assigned)
are padded internally to a square matrix with zero-cost dummy rows; forbidden
entries stay structural throughout, never a numeric penalty.  Ties between
equal-cost optima are broken toward the lexicographically smallest
row-to-column mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FORBIDDEN",
    "CostMatrix",
    "Assignment",
    "InfeasibleAssignmentError",
    "solve",
    "maximize",
]


class _Forbidden:
    """Structural marker for an impossible row/column pairing."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FORBIDDEN"


FORBIDDEN = _Forbidden()

# Relative slack when deciding whether an entry can participate in an optimal
# assignment (tie detection); scaled by the largest finite cost magnitude.
_TIE_RTOL = 1e-9


class InfeasibleAssignmentError(ValueError):
    """No complete assignment exists; ``rows`` is a violating row set whose
    combined allowed columns are fewer than the rows themselves."""

    def __init__(self, rows):
        self.rows = tuple(sorted(rows))
        super().__init__(
            f"no feasible assignment: rows {list(self.rows)} allow fewer columns "
            "than needed"
        )


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost matrix with a boolean mask of forbidden entries.

    ``costs`` holds finite reals (values at forbidden cells are ignored);
    rows <= cols so that every row can be assigned a distinct column.
    """

    costs: np.ndarray
    forbidden: np.ndarray = None
    sense: str = "minimize"

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        if costs.ndim != 2 or costs.shape[0] < 1 or costs.shape[1] < 1:
            raise ValueError(f"cost matrix must be 2-D and non-empty, got {costs.shape}")
        if costs.shape[0] > costs.shape[1]:
            raise ValueError(
                f"need rows <= cols so every row can be assigned, got {costs.shape}"
            )
        if self.forbidden is None:
            forbidden = np.zeros(costs.shape, dtype=bool)
        else:
            forbidden = np.asarray(self.forbidden, dtype=bool)
            if forbidden.shape != costs.shape:
                raise ValueError("forbidden mask shape does not match costs")
        if not np.all(np.isfinite(costs[~forbidden])):
            raise ValueError("costs must be finite; mark impossible pairs FORBIDDEN")
        costs = costs.copy()
        costs[forbidden] = 0.0
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "forbidden", forbidden)

    @classmethod
    def from_rows(cls, rows, sense: str = "minimize") -> "CostMatrix":
        """Build from nested lists whose entries are numbers or FORBIDDEN."""
        n_rows = len(rows)
        n_cols = len(rows[0])
        costs = np.zeros((n_rows, n_cols))
        forbidden = np.zeros((n_rows, n_cols), dtype=bool)
        for i, row in enumerate(rows):
            if len(row) != n_cols:
                raise ValueError("ragged cost rows")
            for j, entry in enumerate(row):
                if entry is FORBIDDEN:
                    forbidden[i, j] = True
                else:
                    costs[i, j] = float(entry)
        return cls(costs=costs, forbidden=forbidden, sense=sense)

    @property
    def shape(self):
        return self.costs.shape


@dataclass(frozen=True)
class Assignment:
    """A complete row-to-column mapping with its total cost (or score)."""

    row_to_col: tuple
    total_cost: float


def _hungarian_square(cost: np.ndarray, allowed: np.ndarray):
    """Shortest-augmenting-path Hungarian kernel on a square matrix.

    Returns (col_to_row, u, v) where col_to_row[j] is the row matched to
    column j and (u, v) are the final dual potentials.  Raises
    InfeasibleAssignmentError carrying the Hall-violating row set when a row
    cannot be placed.
    """
    n = cost.shape[0]
    u = np.zeros(n)
    v = np.zeros(n + 1)
    p = np.full(n + 1, -1, dtype=int)  # p[j] = row matched to column j; p[n] virtual

    for i in range(n):
        p[n] = i
        j0 = n
        minv = np.full(n, np.inf)
        way = np.full(n, n, dtype=int)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            scan = ~used[:n] & allowed[i0]
            if scan.any():
                cols = np.flatnonzero(scan)
                cur = cost[i0, cols] - u[i0] - v[cols]
                better = cur < minv[cols]
                upd = cols[better]
                minv[upd] = cur[better]
                way[upd] = j0
            open_cols = np.flatnonzero(~used[:n])
            j1 = open_cols[np.argmin(minv[open_cols])]
            delta = minv[j1]
            if not np.isfinite(delta):
                tree_rows = {int(p[j]) for j in range(n + 1) if used[j] and p[j] >= 0}
                raise InfeasibleAssignmentError(tree_rows)
            used_cols = used[:n]
            u[p[:n][used_cols]] += delta
            u[i] += delta  # virtual column always carries the entering row
            v[:n][used_cols] -= delta
            minv[~used_cols] -= delta
            j0 = j1
            if p[j0] == -1:
                break
        while j0 != n:
            j_prev = way[j0]
            p[j0] = p[j_prev]
            j0 = j_prev
    return p[:n], u, v


def _matchable(adj, rows, allowed_cols) -> bool:
    """Can every row in ``rows`` be matched to a distinct allowed column?"""
    match_col = {}

    def augment(r, visited):
        for c in adj[r]:
            if c not in allowed_cols or c in visited:
                continue
            visited.add(c)
            if c not in match_col or augment(match_col[c], visited):
                match_col[c] = r
                return True
        return False

    for r in rows:
        if not augment(r, set()):
            return False
    return True


def _lexicographic_refine(cost_sq, allowed_sq, u, v, row_to_col_sq, n_rows, tol):
    """Replace the kernel's mapping by the lexicographically smallest one
    among the equal-cost optima.

    Optimal assignments are exactly the perfect matchings of the admissible
    (zero-reduced-cost) graph of the padded square matrix, padding rows
    included: a padding row is only tight on columns whose potential matches
    its own, so the matchings are checked over the full square.  The first
    ``n_rows`` rows are committed in order to their smallest admissible
    column that leaves the rest perfectly matchable.
    """
    m = cost_sq.shape[0]
    rc = cost_sq - u[:, None] - v[None, :]
    adm = allowed_sq & (np.abs(rc) <= tol)
    adm[np.arange(m), row_to_col_sq] = True
    mapping = row_to_col_sq[:n_rows]
    if np.all(adm[:n_rows].sum(axis=1) == 1):
        return mapping
    adj = [np.flatnonzero(adm[r]).tolist() for r in range(m)]
    chosen = []
    free_cols = set(range(m))
    for i in range(n_rows):
        committed = False
        for c in adj[i]:
            if c not in free_cols:
                continue
            if _matchable(adj, range(i + 1, m), free_cols - {c}):
                chosen.append(c)
                free_cols.discard(c)
                committed = True
                break
        if not committed:
            return mapping
    refined = np.array(chosen, dtype=int)
    old_total = float(cost_sq[np.arange(n_rows), mapping].sum())
    new_total = float(cost_sq[np.arange(n_rows), refined].sum())
    if abs(new_total - old_total) > 2.0 * m * tol + 1e-12:
        return mapping
    return refined


def solve(matrix: CostMatrix) -> Assignment:
    """Minimum-total-cost complete assignment of rows to distinct columns.

    Optimal among all assignments avoiding FORBIDDEN entries; deterministic,
    with ties resolved to the lexicographically smallest row_to_col.
    """
    n_rows, n_cols = matrix.shape
    cost = np.zeros((n_cols, n_cols))
    allowed = np.ones((n_cols, n_cols), dtype=bool)
    cost[:n_rows] = matrix.costs
    allowed[:n_rows] = ~matrix.forbidden

    col_to_row, u, v = _hungarian_square(cost, allowed)
    row_to_col_sq = np.empty(n_cols, dtype=int)
    row_to_col_sq[col_to_row] = np.arange(n_cols)

    finite = matrix.costs[~matrix.forbidden]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    tol = _TIE_RTOL * (1.0 + scale)
    mapping = _lexicographic_refine(
        cost, allowed, u, v[:n_cols], row_to_col_sq, n_rows, tol
    )

    total = float(matrix.costs[np.arange(n_rows), mapping].sum())
    return Assignment(row_to_col=tuple(int(c) for c in mapping), total_cost=total)


def maximize(matrix: CostMatrix) -> Assignment:
    """Maximum-total-score assignment: negate finite entries and solve.

    total_cost on the result is the total of the original (score) entries.
    """
    flipped = CostMatrix(costs=-matrix.costs, forbidden=matrix.forbidden)
    best = solve(flipped)
    rows = np.arange(matrix.shape[0])
    total = float(matrix.costs[rows, list(best.row_to_col)].sum())
    return Assignment(row_to_col=best.row_to_col, total_cost=total)
