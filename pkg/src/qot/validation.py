"""Empirical checks for the identities and bounds behind the pipeline.

Each ``check_*`` function verifies one statement on concrete instances and
returns a small record. The ``suite_*`` drivers run preset batteries of those
checks and emit one dict per check with inputs, statistic, threshold and
verdict; a verdict of ``"info"`` marks context rows that do not gate the
suite outcome.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .entropic import solve_entropic
from .mixture import MixtureSpec, Sample, epsilon_star, oracle_plan, sample_mixture
from .quadratic import SolverConfig, solve_quadratic
from .transport import CostMatrix, cost_matrix


@dataclass
class PerturbationDecomposition:
    """Split of a corrupted-minus-clean cost into shift, diagonal and residual."""

    shift_vector: np.ndarray
    diagonal_part: np.ndarray
    residual: np.ndarray


@dataclass
class ScalingCell:
    n: int
    d: int
    reps: int
    root: int
    redraws: int
    median_abs_scaled: float
    q90_abs_scaled: float
    mean_scaled: float
    stderr_scaled: float
    printed_median_abs: float


@dataclass
class ScalingReport:
    cells: list[ScalingCell]
    seed: int
    ratio: float
    bounded: bool
    centred: bool


@dataclass
class RobustnessRecord:
    lhs: float
    rhs: float
    residual_norm: float
    epsilon: float
    holds: bool


@dataclass
class FrobeniusRecord:
    norm2: float
    identity: float
    k_plus_correction: float


@dataclass
class ComparisonRecord:
    quad_sparsity_fraction: float
    entropic_min_offdiag: float
    dist_quad: float
    dist_entropic: float
    redraws: int


def worker_count() -> int:
    """Worker cap for suite replication loops, honouring QOT_THREADS."""
    raw = os.environ.get("QOT_THREADS", "")
    try:
        requested = int(raw)
    except ValueError:
        requested = 0
    if requested > 0:
        return requested
    return max(1, min(8, os.cpu_count() or 1))


def _parallel_map(fn, items):
    """Order-preserving map over items, threaded when the cap allows."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def decompose_perturbation(
    clean_points: np.ndarray,
    noise: np.ndarray,
    corrupted_points: np.ndarray | None = None,
) -> PerturbationDecomposition:
    """Decompose the cost perturbation into rank-one shift, diagonal and residual.

    With ``s_i = |eta_i|^2`` the corrupted-minus-clean cost satisfies exactly

        C~ - C = (s 1' + 1 s')/2 + Diag(diagonal_part) + E,

    where E is hollow and collects the cross terms
    ``<Y_i - Y_j, eta_i - eta_j> - <eta_i, eta_j>``. The shift part leaves the
    transport optimiser unchanged, so only E matters for plan stability.
    """
    clean_points = np.asarray(clean_points, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != clean_points.shape:
        raise ValueError("noise must match the clean points in shape")
    if corrupted_points is None:
        corrupted_points = clean_points + noise
    else:
        corrupted_points = np.asarray(corrupted_points, dtype=float)
        gap = np.abs(corrupted_points - clean_points - noise).max()
        if gap > 1e-12:
            raise ValueError(f"corrupted points differ from clean+noise by {gap:.3e}")
    delta = cost_matrix(corrupted_points).entries - cost_matrix(clean_points).entries
    s = (noise**2).sum(axis=1)
    residual = delta - 0.5 * (s[:, None] + s[None, :])
    diagonal_part = residual.diagonal().copy()
    np.fill_diagonal(residual, 0.0)
    return PerturbationDecomposition(shift_vector=s, diagonal_part=diagonal_part, residual=residual)


def reconstruct_perturbation(decomposition: PerturbationDecomposition) -> np.ndarray:
    """Reassemble the corrupted-minus-clean cost from its decomposition."""
    s = decomposition.shift_vector
    out = 0.5 * (s[:, None] + s[None, :]) + decomposition.residual
    out[np.diag_indices_from(out)] += decomposition.diagonal_part
    return out


def check_robustness_bound(
    cost_clean: CostMatrix,
    cost_corrupted: CostMatrix,
    decomposition: PerturbationDecomposition,
    cfg: SolverConfig,
) -> RobustnessRecord:
    """Verify the plan stability bound |pi(C) - pi(C~)|_F <= |E|_F / eps.

    The shift and diagonal parts of the perturbation cannot move the
    optimiser, so only the residual enters the right-hand side; both plans
    are nevertheless solved from their full costs, making this an end-to-end
    check rather than a restatement of the decomposition.
    """
    plan_clean = solve_quadratic(cost_clean, cfg)
    plan_corrupted = solve_quadratic(cost_corrupted, cfg)
    if not (plan_clean.diagnostics.converged and plan_corrupted.diagnostics.converged):
        raise RuntimeError("transport solve did not converge inside the robustness check")
    lhs = float(np.linalg.norm(plan_clean.matrix - plan_corrupted.matrix))
    residual_norm = float(np.linalg.norm(decomposition.residual))
    rhs = residual_norm / cfg.epsilon
    return RobustnessRecord(
        lhs=lhs,
        rhs=rhs,
        residual_norm=residual_norm,
        epsilon=cfg.epsilon,
        holds=bool(lhs <= rhs + 10.0 * cfg.tol),
    )


def check_frobenius_identity(memberships: np.ndarray) -> FrobeniusRecord:
    """Check |pi|_F^2 = sum_k N_k / (N_k - 1) for the membership plan."""
    plan = oracle_plan(memberships)
    counts = np.asarray(memberships).sum(axis=0)
    occupied = counts[counts > 0]
    norm2 = float((plan.matrix**2).sum())
    identity = float((occupied / (occupied - 1.0)).sum())
    k_plus = float(len(occupied) + (1.0 / (occupied - 1.0)).sum())
    return FrobeniusRecord(norm2=norm2, identity=identity, k_plus_correction=k_plus)


def _sample_without_singletons(spec: MixtureSpec, n: int, seed: int, limit: int = 100):
    """Draw a sample, redrawing with derived seeds until every class has >= 2 points."""
    for attempt in range(limit):
        sample = sample_mixture(spec, n, seed + attempt)
        if (sample.counts[sample.counts > 0] >= 2).all():
            return sample, attempt
    raise RuntimeError(f"no singleton-free sample in {limit} draws from seed {seed}")


def check_prop1(
    spec: MixtureSpec,
    n_grid,
    d_grid,
    reps: int,
    seed: int,
) -> ScalingReport:
    """Measure the per-point error statistic across a (n, d) grid.

    For each sample the statistic is, per point i in class k,

        err_i = sum_{j != i, j in k} |Y_i - Y_j|^2 / (N_k - 1)
                - |Y_i - mu_k|^2 - d sigma^2,

    which has exact mean zero and typical size sqrt(d/n). Cells aggregate the
    scaled statistic ``err * sqrt(n/d)``: its pooled median absolute value
    should be flat across the grid (max/min ratio <= 3) and its mean should
    vanish within three standard errors, estimated from per-replication means.
    A second, historically printed variant ``err/(2 sigma^2) - d sigma^2``
    style statistic is also aggregated, for context only.
    """
    if spec.aniso is not None:
        raise ValueError("the scaling check requires an isotropic mixture")
    cells: list[ScalingCell] = []
    for ci, n in enumerate(n_grid):
        if (n * np.asarray(spec.theta)).min() < 4:
            raise ValueError(f"n={n} gives an expected class size below 4")
        for di, d in enumerate(d_grid):
            spec_d = _embed_spec(spec, d)
            cell_root = seed + 7919 * (ci * len(d_grid) + di)
            cells.append(_scaling_cell(spec_d, n, d, reps, cell_root))
    medians = np.array([c.median_abs_scaled for c in cells])
    ratio = float(medians.max() / medians.min())
    centred = all(abs(c.mean_scaled) <= 3.0 * c.stderr_scaled for c in cells)
    return ScalingReport(
        cells=cells,
        seed=seed,
        ratio=ratio,
        bounded=bool(ratio <= 3.0),
        centred=bool(centred),
    )


def _embed_spec(spec: MixtureSpec, d: int) -> MixtureSpec:
    """Re-embed the component means into dimension d (pad with zeros or truncate).

    Only the weights and variance shape the error statistic; the means cancel
    inside within-class differences, so any embedding is equivalent.
    """
    if spec.d == d:
        return spec
    means = np.zeros((spec.k, d))
    keep = min(d, spec.d)
    means[:, :keep] = spec.means[:, :keep]
    return MixtureSpec(theta=spec.theta, means=means, sigma2=spec.sigma2)


def _scaling_cell(spec: MixtureSpec, n: int, d: int, reps: int, root: int) -> ScalingCell:
    scale = np.sqrt(n / d)
    rep_means = np.empty(reps)
    pooled: list[np.ndarray] = []
    printed: list[np.ndarray] = []
    redraws = 0
    draw_seed = root
    for r in range(reps):
        while True:
            sample = sample_mixture(spec, n, draw_seed)
            draw_seed += 1
            if (sample.counts[sample.counts > 0] >= 2).all():
                break
            redraws += 1
        err, printed_err = _pointwise_errors(sample, spec)
        scaled = err * scale
        rep_means[r] = scaled.mean()
        pooled.append(np.abs(scaled))
        printed.append(np.abs(printed_err) * scale)
    pooled_arr = np.concatenate(pooled)
    return ScalingCell(
        n=n,
        d=d,
        reps=reps,
        root=root,
        redraws=redraws,
        median_abs_scaled=float(np.median(pooled_arr)),
        q90_abs_scaled=float(np.quantile(pooled_arr, 0.9)),
        mean_scaled=float(rep_means.mean()),
        stderr_scaled=float(rep_means.std(ddof=1) / np.sqrt(reps)),
        printed_median_abs=float(np.median(np.concatenate(printed))),
    )


def _pointwise_errors(sample: Sample, spec: MixtureSpec) -> tuple[np.ndarray, np.ndarray]:
    labels = sample.labels
    d = sample.d
    err = np.empty(sample.n)
    printed = np.empty(sample.n)
    for k in np.flatnonzero(sample.counts):
        members = labels == k
        pts = sample.points[members]
        nk = pts.shape[0]
        within = squareform(pdist(pts, metric="sqeuclidean")).sum(axis=1) / (nk - 1)
        centred = ((pts - spec.means[k]) ** 2).sum(axis=1)
        err[members] = within - centred - d * spec.sigma2
        printed[members] = within / (2.0 * spec.sigma2) - d * spec.sigma2 - centred
    return err, printed


def compare_regularisers(
    spec: MixtureSpec,
    n: int,
    epsilon_quadratic: float,
    epsilon_entropic: float,
    seed: int,
    tol: float = 1e-9,
    max_iter: int = 10000,
) -> ComparisonRecord:
    """Contrast quadratic and entropic plans on one sample against the membership plan.

    The quadratic plan is exactly sparse off the support; the entropic plan is
    strictly positive everywhere off the diagonal. Distances are Frobenius
    distances to the membership plan of the true labels.
    """
    sample, redraws = _sample_without_singletons(spec, n, seed)
    cost = cost_matrix(sample.points)
    quad = solve_quadratic(cost, SolverConfig(epsilon=epsilon_quadratic, tol=tol, max_iter=max_iter))
    ent = solve_entropic(cost, SolverConfig(epsilon=epsilon_entropic, tol=tol, max_iter=max_iter))
    if not (quad.diagnostics.converged and ent.diagnostics.converged):
        raise RuntimeError("a solver did not converge inside the comparison")
    oracle = oracle_plan(sample.memberships).matrix
    off = ~np.eye(n, dtype=bool)
    record = ComparisonRecord(
        quad_sparsity_fraction=float((quad.matrix[off] == 0.0).mean()),
        entropic_min_offdiag=float(ent.matrix[off].min()),
        dist_quad=float(np.linalg.norm(quad.matrix - oracle)),
        dist_entropic=float(np.linalg.norm(ent.matrix - oracle)),
        redraws=redraws,
    )
    if not record.entropic_min_offdiag > 0.0:
        raise AssertionError("entropic plan has a vanishing off-diagonal entry")
    return record


# ---------------------------------------------------------------------------
# preset suites


def _record(suite, check, inputs, statistic, threshold, verdict) -> dict:
    return {
        "suite": suite,
        "check": check,
        "inputs": inputs,
        "statistic": statistic,
        "threshold": threshold,
        "verdict": verdict,
    }


def _two_cluster_spec(d: int, separation: float, sigma2: float = 1.0) -> MixtureSpec:
    means = np.zeros((2, d))
    means[0, 0] = -0.5 * separation
    means[1, 0] = 0.5 * separation
    return MixtureSpec(theta=np.array([0.5, 0.5]), means=means, sigma2=sigma2)


def suite_frobenius(seed: int = 0) -> list[dict]:
    """One hundred random membership matrices, each checked exactly."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(100):
        n = int(rng.integers(10, 201))
        k = int(rng.integers(1, 7))
        while True:
            labels = rng.integers(0, k, size=n)
            counts = np.bincount(labels, minlength=k)
            if (counts[counts > 0] >= 2).all():
                break
        memberships = np.zeros((n, k))
        memberships[np.arange(n), labels] = 1.0
        rec = check_frobenius_identity(memberships)
        gap = abs(rec.norm2 - rec.identity)
        cross = abs(rec.identity - rec.k_plus_correction)
        tol = 1e-10
        records.append(
            _record(
                "frobenius",
                f"norm-identity-{i:03d}",
                {"n": n, "k": k, "occupied": int((counts > 0).sum())},
                {"norm2": rec.norm2, "identity": rec.identity,
                 "k_plus_correction": rec.k_plus_correction,
                 "gap": gap, "closed_form_gap": cross},
                tol,
                "pass" if gap <= tol and cross <= tol else "fail",
            )
        )
    return records


def suite_prop1(seed: int = 0) -> list[dict]:
    """Scaling of the per-point error statistic over n in {50..400}, d in {5, 20}."""
    spec = _two_cluster_spec(d=5, separation=6.0)
    report = check_prop1(spec, n_grid=(50, 100, 200, 400), d_grid=(5, 20), reps=200, seed=seed)
    records = []
    for cell in report.cells:
        ratio_to_se = abs(cell.mean_scaled) / cell.stderr_scaled
        records.append(
            _record(
                "prop1",
                f"centred-n{cell.n}-d{cell.d}",
                {"n": cell.n, "d": cell.d, "reps": cell.reps, "redraws": cell.redraws},
                {"mean_scaled": cell.mean_scaled, "stderr": cell.stderr_scaled,
                 "abs_mean_over_se": ratio_to_se,
                 "median_abs_scaled": cell.median_abs_scaled,
                 "q90_abs_scaled": cell.q90_abs_scaled,
                 "printed_median_abs": cell.printed_median_abs},
                3.0,
                "pass" if ratio_to_se <= 3.0 else "fail",
            )
        )
    records.append(
        _record(
            "prop1",
            "scaled-median-flat",
            {"cells": len(report.cells), "seed": report.seed},
            {"ratio_max_over_min": report.ratio,
             "medians": [c.median_abs_scaled for c in report.cells]},
            3.0,
            "pass" if report.bounded else "fail",
        )
    )
    return records


def suite_prop3(seed: int = 0) -> list[dict]:
    """Perturbation decomposition at d in {50, 200, 800}: exactness and residual size."""
    records = []
    rng = np.random.default_rng(seed)
    n = 40
    for d in (50, 200, 800):
        spec = _two_cluster_spec(d=d, separation=8.0)
        sample = sample_mixture(spec, n, int(rng.integers(2**31)))
        noise = _class_noise(rng, sample.labels, d, spec.k)
        corrupted = sample.points + noise
        dec = decompose_perturbation(sample.points, noise, corrupted)
        delta = cost_matrix(corrupted).entries - cost_matrix(sample.points).entries
        recon_gap = float(np.abs(reconstruct_perturbation(dec) - delta).max())
        off = dec.residual[~np.eye(n, dtype=bool)]
        stdev = float(off.std(ddof=1))
        ratio = stdev / np.sqrt(d)
        records.append(
            _record(
                "prop3",
                f"reconstruction-d{d}",
                {"n": n, "d": d},
                {"max_abs_gap": recon_gap},
                1e-12,
                "pass" if recon_gap <= 1e-12 else "fail",
            )
        )
        records.append(
            _record(
                "prop3",
                f"residual-scale-d{d}",
                {"n": n, "d": d},
                {"stdev_offdiag": stdev, "stdev_over_sqrt_d": ratio},
                [0.2, 5.0],
                "pass" if 0.2 <= ratio <= 5.0 else "fail",
            )
        )
    return records


def _class_noise(rng: np.random.Generator, labels: np.ndarray, d: int, k: int) -> np.ndarray:
    """Per-class correlated Gaussian noise, full rank, spectral norm at most one."""
    white = rng.standard_normal((labels.size, d))
    out = np.empty((labels.size, d))
    for c in range(k):
        basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
        scales = rng.uniform(0.1, 1.0, size=d)
        members = labels == c
        out[members] = white[members] @ (basis * np.sqrt(scales)).T
    return out


def suite_thm2(seed: int = 0) -> list[dict]:
    """Stability bound on 100 heteroskedastic instances at d = 100."""
    d, n = 100, 60
    spec = _two_cluster_spec(d=d, separation=8.0)
    eps = epsilon_star(n, spec.sigma2, spec.theta, spec.k).value

    def one(idx: int) -> RobustnessRecord:
        rng = np.random.default_rng(seed + idx)
        sample = sample_mixture(spec, n, seed + idx)
        noise = _class_noise(rng, sample.labels, d, spec.k)
        dec = decompose_perturbation(sample.points, noise)
        cfg = SolverConfig(epsilon=float(eps), tol=1e-9, max_iter=20000)
        return check_robustness_bound(
            cost_matrix(sample.points), cost_matrix(sample.points + noise), dec, cfg
        )

    outcomes = _parallel_map(one, list(range(100)))
    records = []
    for idx, rec in enumerate(outcomes):
        records.append(
            _record(
                "thm2",
                f"bound-{idx:03d}",
                {"n": n, "d": d, "seed": seed + idx},
                {"lhs": rec.lhs, "rhs": rec.rhs, "epsilon": rec.epsilon,
                 "residual_norm": rec.residual_norm, "holds": rec.holds},
                "lhs <= rhs",
                "info",
            )
        )
    held = sum(r.holds for r in outcomes)
    records.append(
        _record(
            "thm2",
            "bound-holds-rate",
            {"instances": len(outcomes)},
            {"held": held, "fraction": held / len(outcomes)},
            0.99,
            "pass" if held / len(outcomes) >= 0.99 else "fail",
        )
    )
    return records


def suite_compare(seed: int = 0) -> list[dict]:
    """Quadratic vs entropic plans against the membership plan on 50 samples.

    The mixture has six collinear components six standard deviations apart:
    every cluster has close neighbours, so the strictly positive entropic plan
    must leak mass across clusters while the quadratic plan zeroes those
    entries exactly, making the sparsity contrast visible in the distances.
    """
    n, d = 300, 2
    means = np.zeros((6, d))
    means[:, 0] = 6.0 * np.arange(6)
    spec = MixtureSpec(theta=np.full(6, 1 / 6), means=means, sigma2=1.0)
    eps = epsilon_star(n, spec.sigma2, spec.theta, spec.k).value

    def one(idx: int) -> ComparisonRecord:
        return compare_regularisers(spec, n, float(eps), float(eps), seed + 1000 * idx)

    outcomes = _parallel_map(one, list(range(50)))
    records = []
    for idx, rec in enumerate(outcomes):
        records.append(
            _record(
                "compare",
                f"positivity-{idx:02d}",
                {"n": n, "d": d, "seed": seed + 1000 * idx, "redraws": rec.redraws},
                {"entropic_min_offdiag": rec.entropic_min_offdiag,
                 "quad_sparsity_fraction": rec.quad_sparsity_fraction,
                 "dist_quad": rec.dist_quad, "dist_entropic": rec.dist_entropic},
                0.0,
                "pass" if rec.entropic_min_offdiag > 0.0 else "fail",
            )
        )
    closer = sum(r.dist_quad <= r.dist_entropic for r in outcomes)
    records.append(
        _record(
            "compare",
            "quadratic-closer-rate",
            {"instances": len(outcomes)},
            {"closer": closer, "fraction": closer / len(outcomes)},
            0.9,
            "pass" if closer / len(outcomes) >= 0.9 else "fail",
        )
    )
    return records


SUITES = {
    "frobenius": suite_frobenius,
    "prop1": suite_prop1,
    "prop3": suite_prop3,
    "thm2": suite_thm2,
    "compare": suite_compare,
}


def run_suites(names, seed: int = 0) -> tuple[list[dict], bool]:
    """Run the named suites; returns all records and whether every check passed."""
    records: list[dict] = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        records.extend(SUITES[name](seed))
    passed = all(r["verdict"] != "fail" for r in records)
    return records, passed
