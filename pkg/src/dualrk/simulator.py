"""Synchronous-round network simulator for the distributed heavy-ball method.

One iteration runs ``S`` communication rounds, one per integrator stage:
every agent forms its stage point from its own state and previously stored
stage derivatives, solves its local conjugate there, broadcasts the solution
to its neighbors, and, after the synchronous barrier, evaluates its slice of
the vector field.  After the last stage each agent applies the weighted
Runge-Kutta combination locally.  No global state is read anywhere; the
only inter-agent coupling is the per-stage broadcast.

The per-agent arithmetic reproduces the monolithic integrator expression by
expression (same accumulation order, same sorted neighbor sums), so the
stacked trajectory of a simulated run coincides with single-vector
integration of the transformed field, which is the central correctness
property tested against :func:`run_heavy_ball_monolithic`.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import harness
from .dynamics import (
    agent_field,
    heavy_ball_field,
    initial_agent_states,
    initial_stacked_state,
    kernel_residual,
    stack_agent_states,
)
from .errors import NonFiniteState
from .graph import LaplacianGraph
from .integrator import ButcherTableau, rk_step
from .objectives import stacked_conjugate

__all__ = [
    "MessageRecord",
    "RunResult",
    "step_size",
    "default_h0",
    "suggested_h0",
    "primal_extract",
    "run_heavy_ball",
    "run_heavy_ball_monolithic",
]


@dataclass(frozen=True)
class MessageRecord:
    """One logged broadcast: round counter, edge endpoints, payload size."""

    round: int
    sender: int
    receiver: int
    payload_dim: int


@dataclass
class RunResult:
    """Everything a finished run exposes.

    ``max_kernel_residual`` is the worst normalized per-coordinate agent-sum
    of the transformed blocks over all iteration boundaries (the
    kernel-orthogonality invariant; it should stay at roundoff level).
    ``min_primal_entry`` is tracked for simplex objectives only, where the
    relevant smoothness assumptions hold on the interior: it is logged
    rather than asserted.
    """

    records: list[harness.MetricsRecord]
    final_states: np.ndarray
    comm_rounds: int
    resolved_step: float
    max_kernel_residual: float
    min_primal_entry: float | None = None
    trajectory: np.ndarray | None = None
    messages: list[MessageRecord] | None = field(default=None, repr=False)


def step_size(h0: float, num_iterations: int, order: int) -> float:
    """Resolve the run step ``h = h0 * N**(-s/(s+1))``."""
    if h0 <= 0:
        raise ValueError("h0 must be positive")
    if num_iterations < 1:
        raise ValueError("num_iterations must be at least 1")
    return h0 * float(num_iterations) ** (-order / (order + 1.0))


def default_h0(graph: LaplacianGraph, objectives) -> float:
    """Conservative default ``h0 = mu / (4 lambda_max(L))``.

    The reciprocal of four times the dual smoothness constant.  Safe but
    often far from tight; see :func:`suggested_h0` for a stability-targeted
    alternative.
    """
    mu = min(obj.strong_convexity for obj in objectives)
    return mu / (4.0 * graph.lambda_max)


# Fraction of the linear-stability limit targeted per integrator order.  The
# first- and second-order methods have no imaginary-axis stability interval
# and survive only on the time-decaying damping, hence the smaller factors.
_SAFETY_BY_ORDER = {1: 0.05, 2: 0.35, 4: 0.65}


def suggested_h0(
    graph: LaplacianGraph,
    objectives,
    tableau: ButcherTableau,
    num_iterations: int,
    safety: float | None = None,
) -> float:
    """Stability-targeted ``h0`` so the resolved step sits near the usable limit.

    The transformed dynamics oscillate at frequencies up to
    ``2 sqrt(lambda_max(L) / mu)``; the resolved step is aimed at ``safety``
    times the inverse of that, then mapped back through the ``N`` scaling.
    Heuristic (as is any ``h0`` policy here): runs that still diverge raise
    :class:`~dualrk.errors.NonFiniteState` rather than silently clipping.
    """
    if safety is None:
        safety = _SAFETY_BY_ORDER.get(tableau.order, 0.3)
    mu = min(obj.strong_convexity for obj in objectives)
    target_step = safety / (2.0 * np.sqrt(graph.lambda_max / mu))
    return target_step * float(num_iterations) ** (tableau.order / (tableau.order + 1.0))


def primal_extract(agent_states: np.ndarray, objectives) -> np.ndarray:
    """Stacked conjugate solutions at the agents' current dual blocks.

    This is the primal iterate all metrics are computed on; each block is an
    agent-local computation.
    """
    block_dim = objectives[0].dim
    y_hat = np.asarray(agent_states)[:, block_dim : 2 * block_dim].reshape(-1)
    return stacked_conjugate(objectives, y_hat)


def run_heavy_ball(
    graph: LaplacianGraph,
    objectives,
    tableau: ButcherTableau,
    num_iterations: int,
    h0: float | None = None,
    reference: harness.ReferenceOptimum | None = None,
    per_agent_normalized: bool = False,
    keep_trajectory: bool = False,
    log_messages: bool = False,
    on_record=None,
) -> RunResult:
    """Execute the distributed method for ``num_iterations`` iterations.

    Deterministic given graph, objectives, and parameters: agents run
    sequentially here, but each one reads only the immutable previous-stage
    snapshot, so any parallel schedule honoring the stage barrier produces
    identical results.

    Parameters
    ----------
    h0 : float, optional
        Base step; the resolved step is ``h0 * N**(-s/(s+1))``.  Defaults to
        :func:`default_h0`.
    reference : ReferenceOptimum, optional
        Precomputed reference optimum; computed on the fly when omitted.
    on_record : callable, optional
        Metric sink invoked with each :class:`~dualrk.harness.MetricsRecord`.

    Raises
    ------
    NonFiniteState
        With the failing iteration index if a stage derivative or state
        leaves the finite range (diagnoses a too-large ``h0``).
    """
    n = graph.node_count
    p = objectives[0].dim
    if len(objectives) != n:
        raise ValueError(f"{len(objectives)} objectives for {n} nodes")
    if n == 1:
        warnings.warn("single-node network: Laplacian is zero (smoke-test only)", stacklevel=2)
    if reference is None:
        reference = harness.reference_optimum(objectives)
    if num_iterations == 0:
        states = initial_agent_states(n, p)
        return RunResult(
            records=[],
            final_states=states,
            comm_rounds=0,
            resolved_step=float("nan"),
            max_kernel_residual=0.0,
            min_primal_entry=None,
            trajectory=stack_agent_states(states, p)[None, :] if keep_trajectory else None,
            messages=[] if log_messages else None,
        )

    if h0 is None:
        h0 = default_h0(graph, objectives)
    h = step_size(h0, num_iterations, tableau.order)
    stages = tableau.stages
    a, b = tableau.a, tableau.b
    simplex = objectives[0].domain == "simplex"

    states = initial_agent_states(n, p)
    derivs = np.zeros((stages, n, 2 * p + 1))
    mailbox = np.empty((n, p))
    records: list[harness.MetricsRecord] = []
    messages: list[MessageRecord] | None = [] if log_messages else None
    trajectory = [stack_agent_states(states, p)] if keep_trajectory else None
    rounds = 0
    max_kres = 0.0
    min_entry = np.inf

    # Divergence is detected and raised as NonFiniteState; the transient
    # overflow warnings numpy would emit on the way there are just noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, num_iterations + 1):
            tic = time.perf_counter()
            for l in range(stages):
                if l == 0:
                    points = states
                else:
                    acc = a[l][0] * derivs[0]
                    for j in range(1, l):
                        acc = acc + a[l][j] * derivs[j]
                    points = states + h * acc
                # Local conjugate solves, then one broadcast round.
                for i in range(n):
                    mailbox[i] = objectives[i].conjugate_argmax(points[i, p : 2 * p])
                rounds += 1
                if messages is not None:
                    for i in range(n):
                        for j in graph.neighbor_lists[i]:
                            messages.append(MessageRecord(rounds, i, int(j), p))
                # Barrier passed: all stage-l broadcasts are visible.
                for i in range(n):
                    derivs[l, i] = agent_field(graph, i, points[i], mailbox[i], mailbox)
                if not np.all(np.isfinite(derivs[l])):
                    raise NonFiniteState(
                        f"non-finite stage derivative at iteration {k}, stage {l + 1}",
                        iteration=k,
                    )
            acc = b[0] * derivs[0]
            for j in range(1, stages):
                acc = acc + b[j] * derivs[j]
            states = states + h * acc
            if not np.all(np.isfinite(states)):
                raise NonFiniteState(f"non-finite state at iteration {k}", iteration=k)

            stacked = stack_agent_states(states, p)
            max_kres = max(max_kres, kernel_residual(stacked, n, p))
            x_stack = primal_extract(states, objectives)
            if simplex:
                min_entry = min(min_entry, float(x_stack.min()))
            record = harness.evaluate_metrics(
                x_stack,
                reference,
                graph,
                objectives,
                iteration=k,
                comm_rounds=rounds,
                wall_time_ms=(time.perf_counter() - tic) * 1e3,
                per_agent_normalized=per_agent_normalized,
            )
            records.append(record)
            if on_record is not None:
                on_record(record)
            if trajectory is not None:
                trajectory.append(stacked)

    return RunResult(
        records=records,
        final_states=states,
        comm_rounds=rounds,
        resolved_step=h,
        max_kernel_residual=max_kres,
        min_primal_entry=None if not simplex else float(min_entry),
        trajectory=np.array(trajectory) if trajectory is not None else None,
        messages=messages,
    )


def run_heavy_ball_monolithic(
    graph: LaplacianGraph,
    objectives,
    tableau: ButcherTableau,
    num_iterations: int,
    h0: float | None = None,
    reference: harness.ReferenceOptimum | None = None,
    per_agent_normalized: bool = False,
    keep_trajectory: bool = False,
) -> RunResult:
    """Single-vector reference path: integrate the monolithic field directly.

    Emits the same records as :func:`run_heavy_ball`; the two trajectories
    must agree to roundoff, which the test suite and the invariant suite
    check routinely.
    """
    n = graph.node_count
    p = objectives[0].dim
    if reference is None:
        reference = harness.reference_optimum(objectives)
    if num_iterations == 0:
        state = initial_stacked_state(n, p)
        return RunResult(
            records=[],
            final_states=state,
            comm_rounds=0,
            resolved_step=float("nan"),
            max_kernel_residual=0.0,
            trajectory=state[None, :] if keep_trajectory else None,
        )
    if h0 is None:
        h0 = default_h0(graph, objectives)
    h = step_size(h0, num_iterations, tableau.order)
    field_fn = heavy_ball_field(graph, objectives)
    state = initial_stacked_state(n, p)
    total = n * p
    simplex = objectives[0].domain == "simplex"
    records: list[harness.MetricsRecord] = []
    trajectory = [state.copy()] if keep_trajectory else None
    max_kres = 0.0
    min_entry = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, num_iterations + 1):
            tic = time.perf_counter()
            try:
                state = rk_step(tableau, field_fn, state, h)
            except NonFiniteState as err:
                raise NonFiniteState(f"iteration {k}: {err}", iteration=k) from err
            max_kres = max(max_kres, kernel_residual(state, n, p))
            x_stack = stacked_conjugate(objectives, state[total : 2 * total])
            if simplex:
                min_entry = min(min_entry, float(x_stack.min()))
            records.append(
                harness.evaluate_metrics(
                    x_stack,
                    reference,
                    graph,
                    objectives,
                    iteration=k,
                    comm_rounds=k * tableau.stages,
                    wall_time_ms=(time.perf_counter() - tic) * 1e3,
                    per_agent_normalized=per_agent_normalized,
                )
            )
            if trajectory is not None:
                trajectory.append(state.copy())
    return RunResult(
        records=records,
        final_states=state,
        comm_rounds=num_iterations * tableau.stages,
        resolved_step=h,
        max_kernel_residual=max_kres,
        min_primal_entry=None if not simplex else float(min_entry),
        trajectory=np.array(trajectory) if trajectory is not None else None,
    )
