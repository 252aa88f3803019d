"""Regularised self-transport over hollow bistochastic matrices.

Quadratic and entropic solvers for the self-transport problem with zero
diagonal, a Gaussian-mixture pipeline built on the quadratic plan (optimal
regularisation strength, membership plans, spectral cluster recovery), and
Monte Carlo checks of the identities and bounds the pipeline relies on.
"""

from .clustering import (
    ClusteringResult,
    GridPoint,
    GridSearchResult,
    cluster_plan,
    estimate_k,
    estimate_params,
    grid_search_sigma,
    permutation_accuracy,
    plan_spectrum,
    spectral_cluster,
)
from .entropic import EntropicState, entropy_of_plan, solve_entropic
from .mixture import (
    EpsilonChoice,
    MixtureSpec,
    Sample,
    entropy,
    epsilon_star,
    log_likelihood,
    oracle_plan,
    sample_mixture,
    surrogate_likelihood,
)
from .quadratic import (
    SolverConfig,
    dual_objective,
    project_hollow_bistochastic,
    qp_oracle,
    solve_quadratic,
)
from .transport import (
    CostMatrix,
    FeasibilityReport,
    PlanDiagnostics,
    TransportPlan,
    cost_matrix,
    feasibility_report,
    shift_cost,
)
from .validation import (
    ComparisonRecord,
    FrobeniusRecord,
    PerturbationDecomposition,
    RobustnessRecord,
    ScalingCell,
    ScalingReport,
    check_frobenius_identity,
    check_prop1,
    check_robustness_bound,
    compare_regularisers,
    decompose_perturbation,
    reconstruct_perturbation,
    run_suites,
)

__version__ = "0.1.0"

__all__ = [
    "ClusteringResult",
    "ComparisonRecord",
    "CostMatrix",
    "EntropicState",
    "EpsilonChoice",
    "FeasibilityReport",
    "FrobeniusRecord",
    "GridPoint",
    "GridSearchResult",
    "MixtureSpec",
    "PerturbationDecomposition",
    "PlanDiagnostics",
    "RobustnessRecord",
    "Sample",
    "ScalingCell",
    "ScalingReport",
    "SolverConfig",
    "TransportPlan",
    "check_frobenius_identity",
    "check_prop1",
    "check_robustness_bound",
    "cluster_plan",
    "compare_regularisers",
    "cost_matrix",
    "decompose_perturbation",
    "dual_objective",
    "entropy",
    "entropy_of_plan",
    "epsilon_star",
    "estimate_k",
    "estimate_params",
    "feasibility_report",
    "grid_search_sigma",
    "log_likelihood",
    "oracle_plan",
    "permutation_accuracy",
    "plan_spectrum",
    "project_hollow_bistochastic",
    "qp_oracle",
    "reconstruct_perturbation",
    "sample_mixture",
    "shift_cost",
    "solve_entropic",
    "solve_quadratic",
    "spectral_cluster",
    "surrogate_likelihood",
]
