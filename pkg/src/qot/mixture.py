"""Gaussian mixture specifications, sampling, likelihoods and the membership plan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .transport import PlanDiagnostics, TransportPlan


@dataclass(frozen=True)
class MixtureSpec:
    """A Gaussian mixture with isotropic base variance.

    ``theta`` holds the component weights, ``means`` the component centres
    (one row each), ``sigma2`` the shared isotropic variance. ``aniso``, when
    given, holds one positive semi-definite matrix per component; component k
    then has covariance ``sigma2 * I + aniso[k]`` and the anisotropic part is
    realised as additive noise that sampling records separately.
    """

    theta: np.ndarray
    means: np.ndarray
    sigma2: float
    aniso: np.ndarray | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        if theta.size != means.shape[0]:
            raise ValueError("theta and means disagree on the number of components")
        if (theta < 0).any() or abs(theta.sum() - 1.0) > 1e-12:
            raise ValueError("theta must be a probability vector (sum 1 within 1e-12)")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "means", means)
        if self.aniso is not None:
            aniso = np.asarray(self.aniso, dtype=float)
            d = means.shape[1]
            if aniso.shape != (theta.size, d, d):
                raise ValueError(f"aniso must have shape (K, d, d) = {(theta.size, d, d)}")
            for k, mat in enumerate(aniso):
                if np.abs(mat - mat.T).max() > 1e-10:
                    raise ValueError(f"aniso[{k}] is not symmetric")
                if np.linalg.eigvalsh(mat).min() < -1e-10:
                    raise ValueError(f"aniso[{k}] is not positive semi-definite")
            object.__setattr__(self, "aniso", aniso)

    @property
    def k(self) -> int:
        return self.theta.size

    @property
    def d(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class Sample:
    """Observations from a mixture, with their one-hot memberships.

    ``noise`` is the realised anisotropic part when ``aniso`` was set, so
    that ``points - noise`` recovers the isotropic draw exactly.
    """

    points: np.ndarray
    memberships: np.ndarray
    counts: np.ndarray
    noise: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return self.memberships.argmax(axis=1)


@dataclass(frozen=True)
class EpsilonChoice:
    """The regularisation level ``n * sigma2 * H(theta) / K`` and its inputs."""

    value: float
    entropy_theta: float
    n: int
    sigma2: float
    k: int
    degenerate: bool


def entropy(theta: np.ndarray) -> float:
    """Shannon entropy ``-sum theta_k ln theta_k`` with ``0 ln 0 = 0``."""
    theta = np.asarray(theta, dtype=float)
    pos = theta[theta > 0]
    return float(-(pos * np.log(pos)).sum())


def sample_mixture(spec: MixtureSpec, n: int, seed: int) -> Sample:
    """Draw ``n`` observations: memberships first, then Gaussian rows.

    A single generator seeded with ``seed`` is consumed in a fixed order, so
    the sample is reproducible. Empty components are allowed here; operations
    that divide by ``N_k - 1`` reject them downstream.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.k, size=n, p=spec.theta)
    memberships = np.zeros((n, spec.k), dtype=int)
    memberships[np.arange(n), labels] = 1
    counts = memberships.sum(axis=0)
    points = spec.means[labels] + np.sqrt(spec.sigma2) * rng.standard_normal((n, spec.d))
    noise = None
    if spec.aniso is not None:
        roots = [_psd_root(mat) for mat in spec.aniso]
        draws = rng.standard_normal((n, spec.d))
        noise = np.stack([draws[i] @ roots[labels[i]].T for i in range(n)])
        points = points + noise
    return Sample(points=points, memberships=memberships, counts=counts, noise=noise)


def _psd_root(mat: np.ndarray) -> np.ndarray:
    # eigenvalue clipping keeps nearly-singular PSD inputs factorisable
    w, v = np.linalg.eigh(mat)
    return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def log_likelihood(sample: Sample, means: np.ndarray, theta: np.ndarray, sigma: float) -> float:
    """Exact complete-data log-likelihood of a labelled Gaussian mixture.

    Returns ``sum_i sum_k Z_ik (ln theta_k - |Y_i - mu_k|^2 / (2 sigma^2))
    - n d log sigma``. A component with weight zero may carry no observations;
    that case is reported as an error rather than ``-inf``.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if theta.size != sample.memberships.shape[1] or means.shape != (theta.size, sample.d):
        raise ValueError("theta/means dimensions do not match the sample")
    labels = sample.labels
    _require_positive_weights(theta, sample.counts)
    n, d = sample.points.shape
    sq = ((sample.points - means[labels]) ** 2).sum(axis=1)
    total = _occupied_log(theta)[labels].sum() - sq.sum() / (2.0 * sigma**2)
    return float(total - n * d * np.log(sigma))


def surrogate_likelihood(sample: Sample, theta: np.ndarray, sigma: float) -> float:
    """Mean-free surrogate of the mixture likelihood.

    Replaces the squared distance to the component mean by the averaged
    pairwise squared distances within the component, which requires every
    occupied component to hold at least two observations.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != sample.memberships.shape[1]:
        raise ValueError("theta length does not match the sample")
    _require_pairs(sample.counts)
    _require_positive_weights(theta, sample.counts)
    labels = sample.labels
    n, d = sample.points.shape
    total = _occupied_log(theta)[labels].sum()
    pair_term = 0.0
    for k in np.flatnonzero(sample.counts > 1):
        pts = sample.points[labels == k]
        # ordered pairs count twice the unordered pair distances
        pair_term += 2.0 * pdist(pts, metric="sqeuclidean").sum() / (sample.counts[k] - 1)
    total -= pair_term / (2.0 * sigma**2)
    return float(total - n * d * (np.log(sigma) - sigma**2))


def _occupied_log(theta: np.ndarray) -> np.ndarray:
    # zero-weight components never get indexed once occupancy was checked
    return np.log(np.where(theta > 0, theta, 1.0))


def _require_positive_weights(theta: np.ndarray, counts: np.ndarray) -> None:
    if (theta[counts > 0] == 0).any():
        raise ValueError("an occupied component has weight zero; likelihood is -inf")


def oracle_plan(memberships: np.ndarray) -> TransportPlan:
    """Membership-defined hollow bistochastic plan.

    Entry (i, j) is ``1 / (N_k - 1)`` when i != j share component k and zero
    otherwise; rows and columns sum to one by construction.
    """
    memberships = np.asarray(memberships)
    if (
        memberships.ndim != 2
        or not np.isin(memberships, (0, 1)).all()
        or (memberships.sum(axis=1) != 1).any()
    ):
        raise ValueError("memberships must be one-hot rows")
    counts = memberships.sum(axis=0)
    _require_pairs(counts)
    weights = np.where(counts > 1, 1.0 / np.where(counts > 1, counts - 1, 1), 0.0)
    matrix = (memberships * weights[None, :]) @ memberships.T
    np.fill_diagonal(matrix, 0.0)
    n = matrix.shape[0]
    diagnostics = PlanDiagnostics(
        iterations=0,
        marginal_violation=float(np.abs(matrix.sum(axis=1) - 1.0).max()),
        sparsity_count=int((matrix == 0).sum() - n),
        converged=True,
        tol=0.0,
    )
    return TransportPlan(matrix=matrix, regulariser="oracle", diagnostics=diagnostics)


def _require_pairs(counts: np.ndarray) -> None:
    if (counts == 1).any():
        bad = np.flatnonzero(counts == 1)
        raise ValueError(f"components {bad.tolist()} hold a single observation (need N_k >= 2)")


def epsilon_star(n: int, sigma2: float, theta: np.ndarray, k: int) -> EpsilonChoice:
    """Regularisation level ``n * sigma2 * H(theta) / K``.

    A point-mass ``theta`` has zero entropy; the choice is then flagged
    degenerate and rejected by the solvers.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != k:
        raise ValueError("k must equal the length of theta")
    h = entropy(theta)
    value = n * sigma2 * h / k
    return EpsilonChoice(
        value=float(value),
        entropy_theta=float(h),
        n=int(n),
        sigma2=float(sigma2),
        k=int(k),
        degenerate=(h == 0.0),
    )
