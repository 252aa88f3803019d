"""Spectral recovery from plans: component count, labels, plug-in estimates."""

import numpy as np
import pytest

from helpers import random_membership
from qot import (
    MixtureSpec,
    SolverConfig,
    cluster_plan,
    cost_matrix,
    epsilon_star,
    estimate_k,
    estimate_params,
    grid_search_sigma,
    oracle_plan,
    permutation_accuracy,
    plan_spectrum,
    sample_mixture,
    solve_quadratic,
    spectral_cluster,
)


def test_spectrum_sorted_descending():
    rng = np.random.default_rng(0)
    z, _ = random_membership(rng, 20, 3)
    spectrum = plan_spectrum(oracle_plan(z))
    assert (np.diff(spectrum) <= 1e-12).all()
    assert spectrum.shape == (20,)


def test_spectrum_symmetrises_input():
    asym = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(plan_spectrum(asym), [0.5, -0.5])


def test_membership_plan_spectrum_closed_form():
    # one unit eigenvalue per component, then -1/(N_k - 1) repeated N_k - 1 times
    z = np.zeros((7, 2))
    z[:4, 0] = 1.0
    z[4:, 1] = 1.0
    spectrum = plan_spectrum(oracle_plan(z))
    expected = np.array([1.0, 1.0, -1 / 3, -1 / 3, -1 / 3, -1 / 2, -1 / 2])
    assert np.allclose(np.sort(spectrum), np.sort(expected), atol=1e-10)


def test_estimate_k_on_membership_plans():
    rng = np.random.default_rng(1)
    for k in (1, 2, 3, 5):
        z, _ = random_membership(rng, 40, k)
        k_hat, spectrum = estimate_k(oracle_plan(z))
        assert k_hat == k
        assert spectrum[0] == pytest.approx(1.0, abs=1e-10)


def test_estimate_k_tie_breaks_to_smallest():
    k_hat, _ = estimate_k(np.diag([1.0, 0.6, 0.2, -0.2]))
    assert k_hat == 1


def test_spectral_cluster_recovers_membership_exactly():
    rng = np.random.default_rng(2)
    z, labels = random_membership(rng, 35, 3)
    predicted = spectral_cluster(oracle_plan(z), 3, seed=0)
    assert permutation_accuracy(labels, predicted) == 1.0


def test_spectral_cluster_validates_k():
    rng = np.random.default_rng(3)
    z, _ = random_membership(rng, 10, 2)
    plan = oracle_plan(z)
    with pytest.raises(ValueError):
        spectral_cluster(plan, 0, seed=0)
    with pytest.raises(ValueError):
        spectral_cluster(plan, 11, seed=0)
    assert (spectral_cluster(plan, 1, seed=0) == 0).all()


def test_spectral_cluster_deterministic_in_seed():
    rng = np.random.default_rng(4)
    z, _ = random_membership(rng, 30, 4)
    plan = oracle_plan(z)
    first = spectral_cluster(plan, 4, seed=11)
    second = spectral_cluster(plan, 4, seed=11)
    assert np.array_equal(first, second)


def test_estimate_params_exact_values():
    points = np.array([[0.0, 0.0], [2.0, 0.0], [10.0, 4.0], [10.0, 6.0]])
    labels = np.array([0, 0, 1, 1])
    theta, means, sigma2 = estimate_params(points, labels)
    assert np.allclose(theta, [0.5, 0.5])
    assert np.allclose(means, [[1.0, 0.0], [10.0, 5.0]])
    # residuals: (+-1, 0) and (0, +-1), pooled over n*d = 8 coordinates
    assert sigma2 == pytest.approx(4.0 / 8.0)


def test_estimate_params_zero_variance():
    points = np.tile(np.array([[3.0, 1.0]]), (5, 1))
    theta, means, sigma2 = estimate_params(points, np.zeros(5, dtype=int))
    assert sigma2 == 0.0
    assert np.allclose(means, [[3.0, 1.0]])
    assert np.allclose(theta, [1.0])


def test_estimate_params_rejects_empty_class():
    points = np.zeros((3, 1))
    with pytest.raises(ValueError):
        estimate_params(points, np.array([0, 2, 2]))
    with pytest.raises(ValueError):
        estimate_params(points, np.array([1, 1, 2]))


def test_cluster_plan_end_to_end_on_separated_mixture():
    means = np.zeros((2, 8))
    means[1, 0] = 10.0
    spec = MixtureSpec(theta=np.array([0.5, 0.5]), means=means, sigma2=1.0)
    sample = sample_mixture(spec, n=80, seed=5)
    eps = epsilon_star(80, 1.0, spec.theta, 2).value
    plan = solve_quadratic(cost_matrix(sample.points), SolverConfig(epsilon=eps))
    result = cluster_plan(plan, sample.points, k=None, seed=0)
    assert result.k_hat == 2
    assert permutation_accuracy(sample.labels, result.labels) == 1.0
    assert result.sigma2_hat == pytest.approx(1.0, rel=0.35)
    implied = epsilon_star(80, result.sigma2_hat, result.theta_hat, 2).value
    assert result.epsilon_implied == implied


def test_cluster_plan_respects_fixed_k():
    rng = np.random.default_rng(6)
    z, _ = random_membership(rng, 24, 3)
    points = rng.standard_normal((24, 2))
    result = cluster_plan(oracle_plan(z), points, k=2, seed=0)
    assert result.k_hat == 2
    assert result.theta_hat.shape == (2,)


def test_permutation_accuracy_cases():
    reference = np.array([0, 0, 1, 1])
    assert permutation_accuracy(reference, reference) == 1.0
    assert permutation_accuracy(reference, 1 - reference) == 1.0
    assert permutation_accuracy(reference, np.array([0, 1, 0, 1])) == 0.5


def test_permutation_accuracy_greedy_above_six_classes():
    rng = np.random.default_rng(7)
    reference = np.repeat(np.arange(8), 5)
    shuffle = rng.permutation(8)
    assert permutation_accuracy(reference, shuffle[reference]) == 1.0


def test_grid_search_traces_every_point_and_records_failures():
    spec = MixtureSpec(
        theta=np.array([0.5, 0.5]),
        means=np.array([[0.0], [10.0]]),
        sigma2=1.0,
    )
    sample = sample_mixture(spec, n=40, seed=8)
    result = grid_search_sigma(
        sample.points,
        sigma2_grid=[0.5, 1.0],
        theta_entropy_grid=[0.0, np.log(2.0)],
        k_grid=[2],
        cfg=SolverConfig(epsilon=1.0),
        seed=0,
    )
    assert len(result.trace) == 4
    failed = [p for p in result.trace if p.failed]
    assert len(failed) == 2  # H = 0 makes epsilon degenerate
    assert all(p.epsilon == 0.0 and p.message for p in failed)
    assert not result.best.failed
    assert result.best.result is not None
    assert permutation_accuracy(sample.labels, result.best.result.labels) == 1.0


def test_grid_search_rejects_empty_grid():
    with pytest.raises(ValueError):
        grid_search_sigma(np.zeros((4, 1)), [], [0.5], [2], SolverConfig(epsilon=1.0))


def test_grid_search_raises_when_everything_fails():
    with pytest.raises(RuntimeError):
        grid_search_sigma(
            np.random.default_rng(9).standard_normal((6, 1)),
            [1.0],
            [0.0],
            [2],
            SolverConfig(epsilon=1.0),
        )
