"""Entropy-regularised hollow self-transport via Sinkhorn scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .quadratic import SolverConfig, _marginal_violation
from .transport import CostMatrix, PlanDiagnostics, TransportPlan


@dataclass
class EntropicState:
    """Sinkhorn scaling vectors together with the hollowed Gibbs kernel."""

    scalings: tuple[np.ndarray, np.ndarray]
    kernel: np.ndarray


def solve_entropic(cost: CostMatrix, cfg: SolverConfig) -> TransportPlan:
    """Minimise ``<pi, C> + eps * sum pi_ij log pi_ij`` over hollow bistochastic matrices.

    The hollow constraint is enforced by zeroing the kernel diagonal, which
    plain Sinkhorn scaling never resurrects. When ``eps < max(C)/500`` the
    iteration switches to the log-domain form automatically to dodge kernel
    underflow. Potentials are reported as ``(f, g) = eps * log(scalings)``.
    """
    C = cost.entries
    n = cost.n
    if n < 2:
        raise ValueError("need n >= 2")
    eps = cfg.epsilon
    if eps < C.max() / 500.0:
        f, g, iterations, violation = _sinkhorn_log(C, eps, cfg.tol, cfg.max_iter)
        matrix = _plan_from_log_potentials(C, f, g, eps)
    else:
        state, iterations, violation = _sinkhorn_scaling(C, eps, cfg.tol, cfg.max_iter)
        r, s = state.scalings
        matrix = (r[:, None] * state.kernel) * s[None, :]
        with np.errstate(divide="ignore"):
            f, g = eps * np.log(r), eps * np.log(s)
    violation = _marginal_violation(matrix)
    diagnostics = PlanDiagnostics(
        iterations=iterations,
        marginal_violation=float(violation),
        sparsity_count=int((matrix == 0).sum() - n),
        converged=bool(violation <= cfg.tol),
        tol=cfg.tol,
    )
    return TransportPlan(
        matrix=matrix,
        regulariser="entropic",
        potentials=(f, g),
        epsilon=eps,
        diagnostics=diagnostics,
    )


def entropy_of_plan(plan: TransportPlan | np.ndarray) -> float:
    """Plan entropy ``-sum pi_ij log pi_ij`` with ``0 log 0 = 0``."""
    matrix = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    positive = matrix[matrix > 0]
    return float(-(positive * np.log(positive)).sum())


def _sinkhorn_scaling(C, eps, tol, max_iter):
    n = C.shape[0]
    with np.errstate(over="ignore"):
        kernel = np.exp(-C / eps)
    np.fill_diagonal(kernel, 0.0)
    if not np.isfinite(kernel).all():
        raise FloatingPointError("Gibbs kernel overflowed; increase epsilon or rescale the cost")
    if (kernel.sum(axis=1) == 0).any() or (kernel.sum(axis=0) == 0).any():
        raise FloatingPointError(
            "Gibbs kernel underflowed to zero in a full row or column; "
            "increase epsilon (the log-domain path engages below max(C)/500)"
        )
    r = np.ones(n)
    s = np.ones(n)
    violation = np.inf
    for it in range(1, max_iter + 1):
        r = 1.0 / (kernel @ s)
        s = 1.0 / (kernel.T @ r)
        # columns are exact after the s-update; the residual sits in the rows
        violation = np.abs(r * (kernel @ s) - 1.0).max()
        if violation <= tol:
            return EntropicState((r, s), kernel), it, violation
    return EntropicState((r, s), kernel), max_iter, violation


def _sinkhorn_log(C, eps, tol, max_iter):
    n = C.shape[0]
    diag = np.eye(n, dtype=bool)
    f = np.zeros(n)
    g = np.zeros(n)
    violation = np.inf
    for it in range(1, max_iter + 1):
        logits = (g[None, :] - C) / eps
        logits[diag] = -np.inf
        f = -eps * logsumexp(logits, axis=1)
        logits = (f[:, None] - C) / eps
        logits[diag] = -np.inf
        g = -eps * logsumexp(logits, axis=0)
        logits += g[None, :] / eps
        violation = np.abs(np.exp(logsumexp(logits, axis=1)) - 1.0).max()
        if violation <= tol:
            return f, g, it, violation
    return f, g, max_iter, violation


def _plan_from_log_potentials(C, f, g, eps):
    matrix = np.exp((f[:, None] + g[None, :] - C) / eps)
    np.fill_diagonal(matrix, 0.0)
    return matrix
