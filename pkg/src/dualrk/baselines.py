"""Comparison methods: centralized GD, distributed GD, and dual Nesterov.

All baselines emit the same :class:`~dualrk.harness.MetricsRecord` schema as
the main method, so traces are directly comparable on a shared
communication-round axis.

``dual_nag_run`` runs Nesterov's accelerated gradient on the dual in the
same transformed coordinates the heavy-ball method uses (``y_hat`` lives in
the image of the Laplacian square root, so the gradient step becomes
``L x*(z_hat)`` and is executable with one broadcast round per iteration).
It approximates the accelerated dual methods from the literature without
claiming any specific parameterization, hence the neutral name.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import harness
from .errors import NonFiniteState
from .graph import LaplacianGraph, laplacian_apply
from .objectives import dual_value_transformed, stacked_conjugate

__all__ = [
    "BaselineResult",
    "cgd_run",
    "dgd_run",
    "dual_nag_run",
    "dual_gd_run",
]


@dataclass
class BaselineResult:
    """Trace plus method-specific extras from a baseline run."""

    records: list[harness.MetricsRecord]
    final_stack: np.ndarray
    max_kernel_residual: float | None = None
    dual_gaps: list[float] | None = field(default=None, repr=False)


def _check_finite(x: np.ndarray, method: str, k: int) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"{method}: non-finite iterate at iteration {k}", iteration=k)


# Simplex iterates are floored here before gradient evaluation so the
# entropy gradient stays finite when a projection lands on the boundary.
_SIMPLEX_FLOOR = 1e-16


def _feasible(objective, x: np.ndarray) -> np.ndarray:
    x = objective.project(x)
    if objective.domain == "simplex":
        x = np.maximum(x, _SIMPLEX_FLOOR)
        x = x / x.sum()
    return x


def cgd_run(
    objectives,
    step: float,
    num_iterations: int,
    reference: harness.ReferenceOptimum | None = None,
    per_agent_normalized: bool = False,
    start: np.ndarray | None = None,
) -> BaselineResult:
    """Centralized (projected) gradient descent on the shared variable.

    ``x_{k+1} = P(x_k - step * sum_i grad f_i(x_k))`` in dimension ``p``;
    the projection is the identity for unconstrained families and the
    simplex projection for KL.  Metrics are computed on the
    consensus-replicated stack, whose consensus terms vanish identically.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if reference is None:
        reference = harness.reference_optimum(objectives)
    n = len(objectives)
    x = objectives[0].initial_point() if start is None else np.asarray(start, dtype=float)
    records = []
    for k in range(1, num_iterations + 1):
        tic = time.perf_counter()
        grad = np.sum([obj.gradient(x) for obj in objectives], axis=0)
        x = _feasible(objectives[0], x - step * grad)
        _check_finite(x, "cgd", k)
        records.append(
            harness.evaluate_metrics(
                np.tile(x, n),
                reference,
                None,
                objectives,
                iteration=k,
                comm_rounds=k,
                wall_time_ms=(time.perf_counter() - tic) * 1e3,
                per_agent_normalized=per_agent_normalized,
            )
        )
    return BaselineResult(records=records, final_stack=np.tile(x, n))


def dgd_run(
    graph: LaplacianGraph,
    objectives,
    step: float,
    mixing: float,
    num_iterations: int,
    reference: harness.ReferenceOptimum | None = None,
    decaying_step: bool = True,
    per_agent_normalized: bool = False,
    start: np.ndarray | None = None,
) -> BaselineResult:
    """Distributed gradient descent with Laplacian-based mixing.

    ``x_{k+1} = (W (x) I_p) x_k - step_k * grad F(x_k)`` with
    ``W = I - mixing * L`` applied through neighbor exchanges (one
    communication round per iteration) and ``step_k = step / sqrt(k)`` by
    default.  The decaying step suits the nonsmooth simplex family; pass
    ``decaying_step=False`` for a constant step on smooth problems.

    ``mixing`` must lie in ``[0, 2 / lambda_max(L))`` so ``W`` is a valid
    mixing matrix; zero is accepted and decouples the network into
    independent local descents.
    """
    if not 0.0 <= mixing < 2.0 / graph.lambda_max:
        raise ValueError(f"mixing must be in [0, {2.0 / graph.lambda_max:.6g})")
    if step < 0:
        raise ValueError("step must be nonnegative")
    if reference is None:
        reference = harness.reference_optimum(objectives)
    n = graph.node_count
    p = objectives[0].dim
    if start is None:
        blocks = np.tile(objectives[0].initial_point(), (n, 1))
    else:
        blocks = np.asarray(start, dtype=float).reshape(n, p).copy()
    records = []
    for k in range(1, num_iterations + 1):
        tic = time.perf_counter()
        step_k = step / np.sqrt(k) if decaying_step else step
        mixed = blocks - mixing * laplacian_apply(graph, blocks.reshape(-1), p).reshape(n, p)
        for i, obj in enumerate(objectives):
            blocks[i] = _feasible(obj, mixed[i] - step_k * obj.gradient(blocks[i]))
        _check_finite(blocks, "dgd", k)
        records.append(
            harness.evaluate_metrics(
                blocks.reshape(-1),
                reference,
                graph,
                objectives,
                iteration=k,
                comm_rounds=k,
                wall_time_ms=(time.perf_counter() - tic) * 1e3,
                per_agent_normalized=per_agent_normalized,
            )
        )
    return BaselineResult(records=records, final_stack=blocks.reshape(-1).copy())


def _dual_descent(
    graph: LaplacianGraph,
    objectives,
    step: float,
    num_iterations: int,
    reference: harness.ReferenceOptimum | None,
    per_agent_normalized: bool,
    record_dual_gap: bool,
    momentum: bool,
    method: str,
) -> BaselineResult:
    if step <= 0:
        raise ValueError("step must be positive")
    if reference is None:
        reference = harness.reference_optimum(objectives)
    n = graph.node_count
    p = objectives[0].dim
    y_hat = np.zeros(n * p)
    y_prev = y_hat
    z_hat = y_hat
    records = []
    gaps: list[float] | None = [] if record_dual_gap else None
    max_kres = 0.0
    for k in range(1, num_iterations + 1):
        tic = time.perf_counter()
        anchor = z_hat if momentum else y_hat
        grad = laplacian_apply(graph, stacked_conjugate(objectives, anchor), p)
        y_new = anchor - step * grad
        if momentum:
            z_hat = y_new + ((k - 1.0) / (k + 2.0)) * (y_new - y_prev)
            y_prev = y_new
        y_hat = y_new
        _check_finite(y_hat, method, k)
        sums = np.abs(y_hat.reshape(n, p).sum(axis=0)).max()
        max_kres = max(max_kres, float(sums / (1.0 + np.linalg.norm(y_hat))))
        x_stack = stacked_conjugate(objectives, y_hat)
        if gaps is not None:
            gaps.append(dual_value_transformed(objectives, y_hat) + reference.f_star)
        records.append(
            harness.evaluate_metrics(
                x_stack,
                reference,
                graph,
                objectives,
                iteration=k,
                comm_rounds=k,
                wall_time_ms=(time.perf_counter() - tic) * 1e3,
                per_agent_normalized=per_agent_normalized,
            )
        )
    return BaselineResult(
        records=records,
        final_stack=stacked_conjugate(objectives, y_hat),
        max_kernel_residual=max_kres,
        dual_gaps=gaps,
    )


def dual_nag_run(
    graph: LaplacianGraph,
    objectives,
    step: float,
    num_iterations: int,
    reference: harness.ReferenceOptimum | None = None,
    per_agent_normalized: bool = False,
    record_dual_gap: bool = False,
) -> BaselineResult:
    """Nesterov-accelerated gradient descent on the transformed dual.

    Updates ``y_hat_k = z_hat_{k-1} - step * L x*(z_hat_{k-1})`` followed by
    the momentum combination ``z_hat_k = y_hat_k + (k-1)/(k+2) *
    (y_hat_k - y_hat_{k-1})``; at ``k = 1`` the momentum coefficient is zero
    and the step is plain gradient descent.  One broadcast round per
    iteration; ``step <= mu / lambda_max(L)`` (the inverse of the dual
    smoothness constant) is the recommended regime.

    With ``record_dual_gap=True`` the per-iteration dual suboptimality
    ``phi(y_k) - phi(y*)`` is recorded in ``dual_gaps``.
    """
    return _dual_descent(
        graph,
        objectives,
        step,
        num_iterations,
        reference,
        per_agent_normalized,
        record_dual_gap,
        momentum=True,
        method="dual_nag",
    )


def dual_gd_run(
    graph: LaplacianGraph,
    objectives,
    step: float,
    num_iterations: int,
    reference: harness.ReferenceOptimum | None = None,
    per_agent_normalized: bool = False,
    record_dual_gap: bool = False,
) -> BaselineResult:
    """Plain gradient descent on the transformed dual (momentum-free control).

    Same step rule and recording as :func:`dual_nag_run` without the
    momentum combination; used as the side-by-side comparison that the
    accelerated variant must beat.
    """
    return _dual_descent(
        graph,
        objectives,
        step,
        num_iterations,
        reference,
        per_agent_normalized,
        record_dual_gap,
        momentum=False,
        method="dual_gd",
    )
