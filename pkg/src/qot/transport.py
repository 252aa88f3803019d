"""Cost matrices, transport plans and feasibility checks shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


@dataclass(frozen=True)
class CostMatrix:
    """Square cost matrix for a self-transport problem.

    ``from_points`` records whether the matrix was built from a point cloud
    (half squared Euclidean distances: symmetric, nonnegative, zero diagonal)
    or loaded raw, in which case no structural guarantees apply.
    """

    entries: np.ndarray
    from_points: bool = False

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {entries.shape}")
        if not np.isfinite(entries).all():
            raise ValueError("cost matrix contains non-finite entries")
        if self.from_points:
            if np.abs(entries - entries.T).max() > 1e-10:
                raise ValueError("point-built cost matrix must be symmetric")
            if np.diagonal(entries).any():
                raise ValueError("point-built cost matrix must have zero diagonal")
            if entries.min() < 0:
                raise ValueError("point-built cost matrix must be nonnegative")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self) -> bool:
        return bool((self.entries == self.entries.T).all())


@dataclass
class PlanDiagnostics:
    """Solver bookkeeping attached to a plan."""

    iterations: int
    marginal_violation: float
    sparsity_count: int
    converged: bool
    tol: float


@dataclass
class TransportPlan:
    """A hollow bistochastic coupling with the potentials that produced it.

    ``regulariser`` is one of ``"quadratic"``, ``"entropic"`` or ``"oracle"``
    (membership-defined plan, no potentials). Potentials are ``(u, v)`` for the
    quadratic solver and ``(f, g)`` for the entropic one.
    """

    matrix: np.ndarray
    regulariser: str
    potentials: tuple[np.ndarray, np.ndarray] | None = None
    epsilon: float | None = None
    diagnostics: PlanDiagnostics | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FeasibilityReport:
    max_row_violation: float
    max_col_violation: float
    min_entry: float
    max_abs_diagonal: float
    tol: float
    feasible: bool


def cost_matrix(points: np.ndarray) -> CostMatrix:
    """Half squared Euclidean distances, one evaluation per unordered pair."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    entries = 0.5 * squareform(pdist(points, metric="sqeuclidean"))
    return CostMatrix(entries, from_points=True)


def shift_cost(cost: CostMatrix, a: np.ndarray, b: np.ndarray, diag: np.ndarray) -> CostMatrix:
    """Return ``C + a 1^T + 1 b^T + Diag(diag)``.

    Rank-one row/column shifts plus diagonal changes leave the hollow
    self-transport optimiser unchanged; this builds inputs for those
    invariance checks.
    """
    n = cost.n
    a = np.asarray(a, dtype=float).reshape(n)
    b = np.asarray(b, dtype=float).reshape(n)
    diag = np.asarray(diag, dtype=float).reshape(n)
    entries = cost.entries + a[:, None] + b[None, :] + np.diag(diag)
    return CostMatrix(entries, from_points=False)


def feasibility_report(plan: TransportPlan | np.ndarray, tol: float) -> FeasibilityReport:
    """Measure how far a matrix sits from the hollow bistochastic polytope."""
    matrix = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    row = np.abs(matrix.sum(axis=1) - 1.0).max()
    col = np.abs(matrix.sum(axis=0) - 1.0).max()
    min_entry = matrix.min()
    max_diag = np.abs(np.diagonal(matrix)).max()
    feasible = row <= tol and col <= tol and min_entry >= -tol and max_diag <= tol
    return FeasibilityReport(
        max_row_violation=float(row),
        max_col_violation=float(col),
        min_entry=float(min_entry),
        max_abs_diagonal=float(max_diag),
        tol=float(tol),
        feasible=bool(feasible),
    )
