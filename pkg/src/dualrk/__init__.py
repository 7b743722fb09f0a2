"""Distributed consensus optimization by discretizing the dual heavy-ball flow.

A network of agents minimizes a sum of strongly convex local objectives
subject to consensus.  Instead of running a momentum method on the dual,
the main algorithm integrates the damped second-order dual dynamics with an
explicit Runge-Kutta method; after a change of variables each integrator
stage costs exactly one broadcast of conjugate solutions between neighbors.
Higher integrator orders buy faster decay per communication round.

The package is a plain numpy/scipy library: graphs and spectra
(:mod:`dualrk.graph`), dual-friendly objectives (:mod:`dualrk.objectives`),
Runge-Kutta machinery (:mod:`dualrk.integrator`), the transformed dynamics
(:mod:`dualrk.dynamics`), the synchronous network simulator
(:mod:`dualrk.simulator`), comparison baselines (:mod:`dualrk.baselines`),
and the metrics/rate-fitting harness (:mod:`dualrk.harness`).  The ``dualrk``
console script drives experiments from config files; the ``demos/``
directory walks through each capability.
"""

from .baselines import BaselineResult, cgd_run, dgd_run, dual_gd_run, dual_nag_run
from .config import ExperimentConfig, load_config, resolve_instance
from .dynamics import agent_field, heavy_ball_field, kernel_residual
from .errors import (
    ConfigError,
    ConnectivityFailure,
    DegenerateError,
    DimensionMismatch,
    DualRKError,
    InsufficientData,
    NonFiniteState,
    NonPositiveMetric,
    NonPositiveTime,
    SingularSystem,
)
from .graph import (
    LaplacianGraph,
    Topology,
    build_graph,
    dense_laplacian,
    laplacian_apply,
    spectral_bounds,
    sqrt_laplacian,
)
from .harness import (
    MetricsRecord,
    RateFit,
    ReferenceOptimum,
    evaluate_metrics,
    fit_rate,
    read_metrics_csv,
    reference_optimum,
    theory_diagnostics,
    write_metrics_csv,
)
from .integrator import ButcherTableau, empirical_order, rk_step, tableau, tableau_for_order
from .objectives import (
    DualFriendlyObjective,
    KLLocal,
    QuadraticLocal,
    dual_value,
    dual_value_transformed,
    random_kl_instance,
    random_regression_instance,
    stacked_conjugate,
)
from .simulator import (
    RunResult,
    default_h0,
    primal_extract,
    run_heavy_ball,
    run_heavy_ball_monolithic,
    step_size,
    suggested_h0,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # graph
    "Topology",
    "LaplacianGraph",
    "build_graph",
    "spectral_bounds",
    "laplacian_apply",
    "dense_laplacian",
    "sqrt_laplacian",
    # objectives
    "DualFriendlyObjective",
    "QuadraticLocal",
    "KLLocal",
    "stacked_conjugate",
    "dual_value",
    "dual_value_transformed",
    "random_regression_instance",
    "random_kl_instance",
    # integrator
    "ButcherTableau",
    "tableau",
    "tableau_for_order",
    "rk_step",
    "empirical_order",
    # dynamics
    "agent_field",
    "heavy_ball_field",
    "kernel_residual",
    # simulator
    "RunResult",
    "run_heavy_ball",
    "run_heavy_ball_monolithic",
    "primal_extract",
    "step_size",
    "default_h0",
    "suggested_h0",
    # baselines
    "BaselineResult",
    "cgd_run",
    "dgd_run",
    "dual_nag_run",
    "dual_gd_run",
    # harness
    "MetricsRecord",
    "RateFit",
    "ReferenceOptimum",
    "reference_optimum",
    "evaluate_metrics",
    "fit_rate",
    "theory_diagnostics",
    "write_metrics_csv",
    "read_metrics_csv",
    # config
    "ExperimentConfig",
    "load_config",
    "resolve_instance",
    # errors
    "DualRKError",
    "ConnectivityFailure",
    "DimensionMismatch",
    "SingularSystem",
    "NonFiniteState",
    "NonPositiveTime",
    "DegenerateError",
    "InsufficientData",
    "NonPositiveMetric",
    "ConfigError",
]
