"""The transformed heavy-ball vector field, agent-local and monolithic.

The dual flow being discretized is the damped second-order system

    v' = -(5/t) v - 4 grad phi(y),    y' = v,    t' = 1,

where ``phi`` is the dual of the consensus-constrained problem and
``grad phi(y) = sqrt(L) x*(sqrt(L) y)``.  Because a square root of the
Laplacian is dense in general, the runtime works in the transformed
coordinates ``v_hat = sqrt(L) v`` and ``y_hat = sqrt(L) y``, where the field
becomes

    v_hat' = -(5/t) v_hat - 4 L x*(y_hat),    y_hat' = v_hat,    t' = 1

and only the Laplacian itself appears.  A Laplacian row touches nothing but
a node's own block and its neighbors' conjugate solutions, so each agent can
evaluate its slice of the field from received broadcasts alone.

State layouts
-------------
agent      ``[v_hat_i (p), y_hat_i (p), t]``       length ``2p + 1``
monolithic ``[v_hat (np), y_hat (np), t]``         length ``2np + 1``

Starting every agent at ``(0, 0, 1)`` keeps both transformed blocks summing
to zero across agents in every coordinate, for the whole run; that is the
kernel-orthogonality invariant tracked by the simulator.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from .errors import DimensionMismatch, NonPositiveTime
from .graph import LaplacianGraph, laplacian_apply, sqrt_apply, sqrt_laplacian
from .objectives import stacked_conjugate

__all__ = [
    "initial_agent_states",
    "initial_stacked_state",
    "stack_agent_states",
    "agent_field",
    "heavy_ball_field",
    "untransformed_field",
    "transform_state",
    "kernel_residual",
]

DAMPING = 5.0
GRADIENT_WEIGHT = 4.0


def initial_agent_states(n: int, block_dim: int) -> np.ndarray:
    """Per-agent start states ``(0, 0, 1)``, shape ``(n, 2p + 1)``."""
    states = np.zeros((n, 2 * block_dim + 1))
    states[:, -1] = 1.0
    return states


def initial_stacked_state(n: int, block_dim: int) -> np.ndarray:
    """Monolithic start state, shape ``(2np + 1,)`` with time 1."""
    state = np.zeros(2 * n * block_dim + 1)
    state[-1] = 1.0
    return state


def stack_agent_states(states: np.ndarray, block_dim: int) -> np.ndarray:
    """Concatenate per-agent states into the monolithic layout.

    Agent time coordinates must agree (they all integrate ``t' = 1`` with
    the same step, so they stay identical); the shared value is taken from
    agent 0.
    """
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    out = np.empty(2 * n * block_dim + 1)
    out[: n * block_dim] = states[:, :block_dim].reshape(-1)
    out[n * block_dim : 2 * n * block_dim] = states[:, block_dim : 2 * block_dim].reshape(-1)
    out[-1] = states[0, -1]
    return out


def agent_field(
    graph: LaplacianGraph,
    agent: int,
    state: np.ndarray,
    own_x_star: np.ndarray,
    neighbor_x_stars,
) -> np.ndarray:
    """Agent slice of the transformed field from local data and broadcasts.

    Parameters
    ----------
    state : ndarray
        The agent's ``[v_hat, y_hat, t]`` stage point.
    own_x_star : ndarray
        The agent's conjugate solution at the stage point.
    neighbor_x_stars : mapping or ndarray
        Either ``{neighbor: x_star}`` covering exactly the agent's neighbors,
        or the full ``(n, p)`` mailbox of broadcasts, of which only neighbor
        rows are read.  The neighbor sum runs in sorted index order so the
        result is bitwise identical to the monolithic Laplacian application.
    """
    block_dim = own_x_star.shape[0]
    t = state[-1]
    if t <= 0.0:
        raise NonPositiveTime(f"agent {agent}: time coordinate {t} is not positive")
    nb = graph.neighbor_lists[agent]
    if isinstance(neighbor_x_stars, Mapping):
        if len(neighbor_x_stars) != len(nb):
            raise DimensionMismatch(
                f"agent {agent}: got {len(neighbor_x_stars)} broadcasts for {len(nb)} neighbors"
            )
        block = np.array([neighbor_x_stars[int(j)] for j in nb])
    else:
        block = np.asarray(neighbor_x_stars, dtype=float)[nb]
    lap_row = len(nb) * own_x_star - block.sum(axis=0)
    v_hat = state[:block_dim]
    out = np.empty_like(state)
    out[:block_dim] = -(DAMPING / t) * v_hat - GRADIENT_WEIGHT * lap_row
    out[block_dim : 2 * block_dim] = v_hat
    out[-1] = 1.0
    return out


def heavy_ball_field(graph: LaplacianGraph, objectives):
    """Monolithic transformed field over the stacked state.

    Serves both as the correctness oracle for the per-agent evaluation and
    as a convenient single-vector reference path; the simulator's stacked
    trajectory must coincide with integrating this field.
    """
    block_dim = objectives[0].dim
    total = graph.node_count * block_dim

    def field(state: np.ndarray) -> np.ndarray:
        t = state[-1]
        if t <= 0.0:
            raise NonPositiveTime(f"time coordinate {t} is not positive")
        v_hat = state[:total]
        y_hat = state[total : 2 * total]
        x_star = stacked_conjugate(objectives, y_hat)
        lap = laplacian_apply(graph, x_star, block_dim)
        out = np.empty_like(state)
        out[:total] = -(DAMPING / t) * v_hat - GRADIENT_WEIGHT * lap
        out[total : 2 * total] = v_hat
        out[-1] = 1.0
        return out

    return field


def untransformed_field(graph: LaplacianGraph, objectives, sqrt_lap: np.ndarray | None = None):
    """Original-coordinate field ``[v, y, t]`` (test oracle only).

    Needs the materialized Laplacian square root, so keep the node count
    small.  Used to verify that transforming states commutes with the field:
    applying ``sqrt(L)`` block-wise to this field's ``(v, y)`` derivative
    equals :func:`heavy_ball_field` at the transformed state.
    """
    block_dim = objectives[0].dim
    total = graph.node_count * block_dim
    if sqrt_lap is None:
        sqrt_lap = sqrt_laplacian(graph)

    def field(state: np.ndarray) -> np.ndarray:
        t = state[-1]
        if t <= 0.0:
            raise NonPositiveTime(f"time coordinate {t} is not positive")
        v = state[:total]
        y = state[total : 2 * total]
        x_star = stacked_conjugate(objectives, sqrt_apply(sqrt_lap, y, block_dim))
        out = np.empty_like(state)
        out[:total] = -(DAMPING / t) * v - GRADIENT_WEIGHT * sqrt_apply(sqrt_lap, x_star, block_dim)
        out[total : 2 * total] = v
        out[-1] = 1.0
        return out

    return field


def transform_state(state: np.ndarray, sqrt_lap: np.ndarray, n: int, block_dim: int) -> np.ndarray:
    """Map ``[v, y, t]`` to ``[sqrt(L) v, sqrt(L) y, t]`` (oracle helper)."""
    total = n * block_dim
    out = np.empty_like(np.asarray(state, dtype=float))
    out[:total] = sqrt_apply(sqrt_lap, state[:total], block_dim)
    out[total : 2 * total] = sqrt_apply(sqrt_lap, state[total : 2 * total], block_dim)
    out[-1] = state[-1]
    return out


def kernel_residual(stacked_state: np.ndarray, n: int, block_dim: int) -> float:
    """Worst per-coordinate agent-sum of the transformed blocks.

    Both transformed blocks live in the image of ``sqrt(L)``, which is
    orthogonal to the all-ones kernel, so every coordinate should sum to
    zero across agents up to roundoff.  Returns the residual normalized by
    ``1 + ||y_hat||``.
    """
    total = n * block_dim
    v_sums = np.abs(stacked_state[:total].reshape(n, block_dim).sum(axis=0)).max()
    y_hat = stacked_state[total : 2 * total]
    y_sums = np.abs(y_hat.reshape(n, block_dim).sum(axis=0)).max()
    return float(max(v_sums, y_sums) / (1.0 + np.linalg.norm(y_hat)))
