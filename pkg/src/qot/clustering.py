"""Mixture recovery from a transport plan: spectrum, spectral clustering, estimates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .mixture import entropy, epsilon_star
from .quadratic import SolverConfig, solve_quadratic
from .transport import CostMatrix, TransportPlan, cost_matrix


@dataclass
class ClusteringResult:
    """Labels and plug-in mixture estimates recovered from a plan."""

    labels: np.ndarray
    k_hat: int
    theta_hat: np.ndarray
    means_hat: np.ndarray
    sigma2_hat: float
    epsilon_implied: float
    spectrum: np.ndarray


@dataclass
class GridPoint:
    sigma2: float
    entropy_theta: float
    k: int
    epsilon: float
    objective: float
    result: ClusteringResult | None
    failed: bool
    message: str = ""


@dataclass
class GridSearchResult:
    best: GridPoint
    trace: list[GridPoint]


def plan_spectrum(plan: TransportPlan | np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetrised plan, sorted descending."""
    matrix = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    return eigenvalues[::-1]


def estimate_k(plan: TransportPlan | np.ndarray) -> tuple[int, np.ndarray]:
    """Estimate the number of components from the plan's spectrum.

    A membership plan has one unit eigenvalue per occupied component and
    negative eigenvalues otherwise, so the component count is read off as the
    largest gap between consecutive sorted eigenvalues, restricted to the
    positive part of the spectrum. Ties resolve to the smallest count.
    """
    spectrum = plan_spectrum(plan)
    positive = np.flatnonzero(spectrum > 0)
    # a bistochastic matrix has eigenvalue 1 and, being hollow, zero trace,
    # so the positive part is non-empty and never reaches the last index
    gaps = spectrum[positive] - spectrum[positive + 1]
    return int(positive[np.argmax(gaps)]) + 1, spectrum


def spectral_cluster(plan: TransportPlan | np.ndarray, k: int, seed: int) -> np.ndarray:
    """Cluster points by k-means on the row-normalised top eigenvectors."""
    matrix = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    n = matrix.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if k == 1:
        return np.zeros(n, dtype=int)
    _, vectors = np.linalg.eigh(0.5 * (matrix + matrix.T))
    embedding = vectors[:, -k:]
    norms = np.linalg.norm(embedding, axis=1, keepdims=True)
    embedding = np.where(norms > 0, embedding / np.where(norms > 0, norms, 1.0), 0.0)
    labels, _ = _kmeans(embedding, k, np.random.default_rng(seed))
    return labels


def estimate_params(points: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Plug-in weights, means and pooled isotropic variance for given labels."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    n, d = points.shape
    classes = np.unique(labels)
    k = labels.max() + 1
    if len(classes) != k or classes[0] != 0:
        raise ValueError("labels must use every class in 0..K-1 (empty class found)")
    counts = np.bincount(labels, minlength=k)
    theta_hat = counts / n
    means_hat = np.stack([points[labels == c].mean(axis=0) for c in range(k)])
    sigma2_hat = float(((points - means_hat[labels]) ** 2).sum() / (n * d))
    return theta_hat, means_hat, sigma2_hat


def cluster_plan(
    plan: TransportPlan | np.ndarray,
    points: np.ndarray,
    k: int | None = None,
    seed: int = 0,
) -> ClusteringResult:
    """Full recovery: spectrum, labels, parameter estimates and implied epsilon."""
    k_auto, spectrum = estimate_k(plan)
    k_used = k_auto if k is None else int(k)
    labels = spectral_cluster(plan, k_used, seed)
    theta_hat, means_hat, sigma2_hat = estimate_params(points, labels)
    implied = epsilon_star(points.shape[0], sigma2_hat, theta_hat, k_used)
    return ClusteringResult(
        labels=labels,
        k_hat=k_used,
        theta_hat=theta_hat,
        means_hat=means_hat,
        sigma2_hat=sigma2_hat,
        epsilon_implied=implied.value,
        spectrum=spectrum,
    )


def grid_search_sigma(
    points: np.ndarray,
    sigma2_grid,
    theta_entropy_grid,
    k_grid,
    cfg: SolverConfig,
    seed: int = 0,
) -> GridSearchResult:
    """Grid search over (sigma2, H, K) scoring each point by the penalised objective.

    Each grid point sets ``eps = n sigma2 H / K``, solves the quadratic
    transport, clusters, and scores ``-<pi, C>/sigma2 - n d (log sigma -
    sigma2) + n sum theta_hat ln theta_hat`` with the plug-in entropy of the
    estimated proportions. Failing grid points (degenerate eps, solver
    non-convergence) are recorded and skipped, not fatal.
    """
    points = np.asarray(points, dtype=float)
    if not (len(sigma2_grid) and len(theta_entropy_grid) and len(k_grid)):
        raise ValueError("grids must be non-empty")
    n, d = points.shape
    cost = cost_matrix(points)
    trace: list[GridPoint] = []
    for sigma2 in sigma2_grid:
        for h in theta_entropy_grid:
            for k in k_grid:
                eps = n * sigma2 * h / k
                point = GridPoint(
                    sigma2=float(sigma2), entropy_theta=float(h), k=int(k),
                    epsilon=float(eps), objective=float("nan"), result=None, failed=True,
                )
                try:
                    plan = solve_quadratic(cost, replace(cfg, epsilon=eps))
                    if not plan.diagnostics.converged:
                        raise RuntimeError("solver did not converge at this grid point")
                    result = cluster_plan(plan, points, k=k, seed=seed)
                    point.objective = _penalised_objective(plan, cost, sigma2, n, d, result.theta_hat)
                    point.result = result
                    point.failed = False
                except (ValueError, RuntimeError, FloatingPointError) as exc:
                    point.message = str(exc)
                trace.append(point)
    usable = [p for p in trace if not p.failed]
    if not usable:
        raise RuntimeError("every grid point failed")
    best = max(usable, key=lambda p: p.objective)
    return GridSearchResult(best=best, trace=trace)


def _penalised_objective(plan, cost: CostMatrix, sigma2, n, d, theta_hat) -> float:
    transport_cost = float((plan.matrix * cost.entries).sum())
    return float(
        -transport_cost / sigma2
        - n * d * (0.5 * np.log(sigma2) - sigma2)
        - n * entropy(theta_hat)
    )


def permutation_accuracy(reference: np.ndarray, predicted: np.ndarray) -> float:
    """Fraction of matching labels under the best label permutation.

    Exhaustive over permutations up to 6 classes, greedy matching above.
    """
    reference = np.asarray(reference)
    predicted = np.asarray(predicted)
    n = reference.size
    k = int(max(reference.max(), predicted.max())) + 1
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (reference, predicted), 1)
    if k <= 6:
        best = max(
            sum(confusion[perm[j], j] for j in range(k))
            for perm in itertools.permutations(range(k))
        )
    else:
        work = confusion.copy()
        best = 0
        for _ in range(k):
            r, c = np.unravel_index(np.argmax(work), work.shape)
            best += work[r, c]
            work[r, :] = -1
            work[:, c] = -1
    return best / n


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _kmeans(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    restarts: int = 50,
    max_iter: int = 300,
    rtol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Seeded k-means with k-means++ restarts, returning the best-inertia labels."""
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _lloyd(X, _kmeans_pp_init(X, k, rng), max_iter, rtol)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def _lloyd(X, centers, max_iter, rtol):
    n, k = X.shape[0], centers.shape[0]
    previous = np.inf
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        # an empty cluster grabs the point farthest from its assigned centre
        for c in range(k):
            if not (labels == c).any():
                labels[d2[np.arange(n), labels].argmax()] = c
        inertia = 0.0
        for c in range(k):
            members = labels == c
            centers[c] = X[members].mean(axis=0)
            inertia += ((X[members] - centers[c]) ** 2).sum()
        if previous - inertia <= rtol * max(previous if np.isfinite(previous) else 0.0, 1e-300):
            break
        previous = inertia
    return labels, inertia
