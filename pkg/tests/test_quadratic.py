"""Quadratic solver: reference agreement, projection identity, stability."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_cost
from qot import (
    CostMatrix,
    SolverConfig,
    cost_matrix,
    dual_objective,
    feasibility_report,
    project_hollow_bistochastic,
    qp_oracle,
    shift_cost,
    solve_quadratic,
)
from qot.quadratic import _row_roots


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=1.0, tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=1.0, max_iter=0)


@settings(derandomize=True, max_examples=200, deadline=None)
@given(st.data())
def test_row_roots_solve_piecewise_equation(data):
    # the inner 1-D subproblem: sum_j [t - B_ij]_+ = eps, +inf entries masked
    m = data.draw(st.integers(2, 10))
    k = data.draw(st.integers(1, 4))
    flat = data.draw(
        st.lists(st.floats(-50.0, 50.0), min_size=k * m, max_size=k * m)
    )
    eps = data.draw(st.floats(0.01, 50.0))
    b = np.array(flat).reshape(k, m)
    b[:, data.draw(st.integers(0, m - 1))] = np.inf
    roots = _row_roots(b, eps)
    for i in range(k):
        finite = b[i, np.isfinite(b[i])]
        total = np.maximum(roots[i] - finite, 0.0).sum()
        assert abs(total - eps) <= 1e-8 * max(1.0, eps, np.abs(finite).max())


def test_two_points_unique_plan():
    cost = cost_matrix(np.array([[0.0], [3.0]]))
    for eps in (0.05, 1.0, 50.0):
        plan = solve_quadratic(cost, SolverConfig(epsilon=eps))
        assert np.allclose(plan.matrix, [[0.0, 1.0], [1.0, 0.0]], atol=1e-10)
        assert plan.diagnostics.converged


def test_constant_offdiagonal_cost_gives_uniform_plan():
    n = 6
    c = np.full((n, n), 2.0)
    np.fill_diagonal(c, 0.0)
    plan = solve_quadratic(CostMatrix(c, from_points=False), SolverConfig(epsilon=1.0))
    expected = (np.ones((n, n)) - np.eye(n)) / (n - 1)
    assert np.allclose(plan.matrix, expected, atol=1e-9)


def test_matches_reference_small_instances():
    rng = np.random.default_rng(0)
    worst = 0.0
    for n in (3, 4, 5):
        for eps in (0.1, 1.0, 10.0):
            for _ in range(5):
                cost = CostMatrix(random_cost(rng, n), from_points=False)
                mine = solve_quadratic(cost, SolverConfig(epsilon=eps, tol=1e-10))
                reference = qp_oracle(cost, eps)
                worst = max(worst, np.abs(mine.matrix - reference.matrix).max())
    assert worst <= 1e-6, f"worst deviation from reference {worst:.3e}"


def test_matches_reference_on_point_costs():
    rng = np.random.default_rng(1)
    for _ in range(5):
        cost = cost_matrix(rng.standard_normal((6, 2)))
        mine = solve_quadratic(cost, SolverConfig(epsilon=0.7, tol=1e-10))
        reference = qp_oracle(cost, 0.7)
        assert np.abs(mine.matrix - reference.matrix).max() <= 1e-6


def test_projection_identity():
    # the plan for (C, eps) is the Frobenius projection of -C/eps
    rng = np.random.default_rng(2)
    cost = cost_matrix(rng.standard_normal((12, 3)))
    eps = 2.5
    via_solver = solve_quadratic(cost, SolverConfig(epsilon=eps, tol=1e-10))
    via_projection = project_hollow_bistochastic(-cost.entries / eps, tol=1e-10)
    assert np.abs(via_solver.matrix - via_projection.matrix).max() <= 1e-8


def test_projection_idempotent():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((9, 9))
    once = project_hollow_bistochastic(m, tol=1e-11)
    twice = project_hollow_bistochastic(once.matrix, tol=1e-11)
    assert np.abs(once.matrix - twice.matrix).max() <= 1e-8


def test_feasibility_of_solutions():
    rng = np.random.default_rng(4)
    for n in (5, 40, 150):
        cost = cost_matrix(rng.standard_normal((n, 4)))
        plan = solve_quadratic(cost, SolverConfig(epsilon=1.0, tol=1e-9))
        assert plan.diagnostics.converged
        report = feasibility_report(plan, tol=1e-8)
        assert report.feasible
        assert report.max_abs_diagonal == 0.0
        assert report.min_entry >= 0.0


def test_plans_are_sparse():
    rng = np.random.default_rng(5)
    cost = cost_matrix(rng.standard_normal((30, 3)))
    plan = solve_quadratic(cost, SolverConfig(epsilon=0.5))
    off = ~np.eye(30, dtype=bool)
    assert (plan.matrix[off] == 0.0).mean() > 0.3
    assert plan.diagnostics.sparsity_count == int((plan.matrix == 0).sum()) - 30


def test_shift_invariance():
    rng = np.random.default_rng(6)
    cost = cost_matrix(rng.standard_normal((20, 3)))
    cfg = SolverConfig(epsilon=1.0, tol=1e-10)
    base = solve_quadratic(cost, cfg)
    shifted_cost = shift_cost(
        cost, rng.uniform(-2, 2, 20), rng.uniform(-2, 2, 20), rng.uniform(-5, 5, 20)
    )
    shifted = solve_quadratic(shifted_cost, cfg)
    assert np.abs(base.matrix - shifted.matrix).max() <= 1e-7


def test_nonexpansive_in_cost():
    rng = np.random.default_rng(7)
    for eps in (0.3, 2.0):
        c1 = cost_matrix(rng.standard_normal((15, 2)))
        delta = rng.uniform(-0.5, 0.5, size=(15, 15))
        np.fill_diagonal(delta, 0.0)
        c2 = CostMatrix(c1.entries + delta, from_points=False)
        cfg = SolverConfig(epsilon=eps, tol=1e-10)
        p1 = solve_quadratic(c1, cfg)
        p2 = solve_quadratic(c2, cfg)
        lhs = np.linalg.norm(p1.matrix - p2.matrix)
        assert lhs <= np.linalg.norm(delta) / eps + 1e-6


def test_objective_beats_uniform_feasible_point():
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = int(rng.integers(3, 25))
        cost = CostMatrix(random_cost(rng, n), from_points=False)
        eps = float(rng.uniform(0.2, 5.0))
        plan = solve_quadratic(cost, SolverConfig(epsilon=eps, tol=1e-10))
        uniform = (np.ones((n, n)) - np.eye(n)) / (n - 1)

        def value(p):
            return (p * cost.entries).sum() + 0.5 * eps * (p**2).sum()

        assert value(plan.matrix) <= value(uniform) + 1e-9


def test_duality_gap_closes():
    rng = np.random.default_rng(9)
    cost = cost_matrix(rng.standard_normal((10, 2)))
    eps = 1.5
    plan = solve_quadratic(cost, SolverConfig(epsilon=eps, tol=1e-11))
    u, v = plan.potentials
    primal = (plan.matrix * cost.entries).sum() + 0.5 * eps * (plan.matrix**2).sum()
    dual = dual_objective(cost.entries, u, v, eps)
    assert dual <= primal + 1e-9
    assert primal - dual <= 1e-6


def test_symmetric_cost_gives_symmetric_plan_and_potentials():
    rng = np.random.default_rng(10)
    cost = cost_matrix(rng.standard_normal((14, 3)))
    plan = solve_quadratic(cost, SolverConfig(epsilon=1.0))
    assert np.array_equal(plan.matrix, plan.matrix.T)
    u, v = plan.potentials
    assert np.array_equal(u, v)


def test_asymmetric_mode_agrees_with_symmetric_mode():
    rng = np.random.default_rng(11)
    cost = cost_matrix(rng.standard_normal((10, 2)))
    sym = solve_quadratic(cost, SolverConfig(epsilon=1.0, tol=1e-10, symmetric_mode=True))
    asym = solve_quadratic(cost, SolverConfig(epsilon=1.0, tol=1e-10, symmetric_mode=False))
    assert np.abs(sym.matrix - asym.matrix).max() <= 1e-8


def test_non_convergence_is_flagged_not_raised():
    rng = np.random.default_rng(12)
    cost = cost_matrix(rng.standard_normal((25, 3)))
    plan = solve_quadratic(cost, SolverConfig(epsilon=0.05, tol=1e-14, max_iter=1))
    assert not plan.diagnostics.converged
    assert plan.diagnostics.iterations == 1


def test_rejects_tiny_instance():
    with pytest.raises(ValueError):
        solve_quadratic(CostMatrix(np.zeros((1, 1)), from_points=False), SolverConfig(epsilon=1.0))


def test_qp_oracle_guards():
    rng = np.random.default_rng(13)
    with pytest.raises(ValueError):
        qp_oracle(cost_matrix(rng.standard_normal((9, 2))), 1.0)
    with pytest.raises(ValueError):
        qp_oracle(cost_matrix(rng.standard_normal((4, 2))), 0.0)


def test_qp_oracle_two_points():
    plan = qp_oracle(cost_matrix(np.array([[0.0], [1.0]])), 1.0)
    assert np.allclose(plan.matrix, [[0.0, 1.0], [1.0, 0.0]], atol=1e-10)
