"""Local objectives with exact conjugate-maximizer oracles.

Every objective here is *dual-friendly*: alongside value and gradient it
exposes ``conjugate_argmax(z) = argmax_x { <z, x> - f(x) }`` in closed form.
That map is the only thing the distributed dynamics ever need from an
objective, and for strongly convex ``f`` it is single-valued and
``1/mu``-Lipschitz.

Two families are provided: regularized linear least squares
(:class:`QuadraticLocal`) and KL divergence to a reference distribution on
the probability simplex (:class:`KLLocal`).
"""

from __future__ import annotations

import abc

import numpy as np
import scipy.linalg
from scipy.special import rel_entr

from .errors import DimensionMismatch, DualRKError, SingularSystem
from .graph import LaplacianGraph, sqrt_apply, sqrt_laplacian

__all__ = [
    "DualFriendlyObjective",
    "QuadraticLocal",
    "KLLocal",
    "project_to_simplex",
    "stacked_conjugate",
    "stacked_value",
    "stacked_gradient",
    "dual_value",
    "dual_value_transformed",
    "random_regression_instance",
    "random_kl_instance",
    "load_regression_csv",
    "load_kl_csv",
]

# Seed-stream tags keeping data generation disjoint from graph sampling.
_REGRESSION_STREAM = 101
_KL_STREAM = 202


class DualFriendlyObjective(abc.ABC):
    """A local objective paired with an exact conjugate-maximizer oracle.

    Subclasses are immutable after construction; all evaluations are pure
    functions and may run concurrently across agents.

    Attributes
    ----------
    dim : int
        Dimension ``p`` of the local decision variable.
    domain : str
        ``"real"`` for unconstrained objectives, ``"simplex"`` for
        objectives restricted to the unit simplex.
    strong_convexity : float
        Strong convexity modulus ``mu > 0`` (over the domain).
    lipschitz_hint : float
        Heuristic bound on the gradient norm over the working region; used
        in diagnostics and step-size heuristics only.
    """

    dim: int
    domain = "real"
    strong_convexity: float
    lipschitz_hint: float

    @abc.abstractmethod
    def value(self, x: np.ndarray) -> float:
        """Evaluate ``f(x)``."""

    @abc.abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Evaluate ``grad f(x)`` (interior of the domain)."""

    @abc.abstractmethod
    def conjugate_argmax(self, z: np.ndarray) -> np.ndarray:
        """Return ``argmax_x { <z, x> - f(x) }`` over the domain."""

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the domain (identity when unconstrained)."""
        return np.asarray(x, dtype=float)

    def initial_point(self) -> np.ndarray:
        """A canonical feasible starting point for primal baselines."""
        return np.zeros(self.dim)

    def kkt_residual(self, z: np.ndarray, x: np.ndarray | None = None) -> float:
        """Stationarity residual of the conjugate maximizer at ``z``.

        For unconstrained objectives this is ``||grad f(x*(z)) - z||``.  On
        the simplex the maximizer satisfies stationarity only up to the
        multiplier of the sum constraint, so the residual is measured after
        removing the all-ones component.
        """
        z = np.asarray(z, dtype=float)
        if x is None:
            x = self.conjugate_argmax(z)
        residual = self.gradient(x) - z
        if self.domain == "simplex":
            residual = residual - residual.mean()
        return float(np.linalg.norm(residual))


class QuadraticLocal(DualFriendlyObjective):
    r"""Scaled linear least squares, ``f(x) = (scale/2)||targets - design x||^2
    + (ridge/2)||x||^2``.

    The conjugate maximizer solves ``(scale D^T D + ridge I) x = z + scale D^T t``
    through a Cholesky factorization cached at construction, since the solve
    runs once per stage per iteration.

    Raises
    ------
    SingularSystem
        If ``scale D^T D + ridge I`` is not positive definite, which signals
        fewer rows than columns without a ridge term.
    """

    def __init__(self, design, targets, scale: float = 1.0, ridge: float = 0.0):
        design = np.atleast_2d(np.asarray(design, dtype=float))
        targets = np.atleast_1d(np.asarray(targets, dtype=float))
        if design.shape[0] != targets.shape[0]:
            raise DimensionMismatch(
                f"design has {design.shape[0]} rows but targets has {targets.shape[0]} entries"
            )
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.design = design
        self.targets = targets
        self.scale = float(scale)
        self.ridge = float(ridge)
        self.dim = design.shape[1]
        self.hessian = self.scale * design.T @ design + self.ridge * np.eye(self.dim)
        evals = np.linalg.eigvalsh(self.hessian)
        if evals[0] <= self.dim * np.finfo(float).eps * max(evals[-1], 0.0):
            raise SingularSystem(
                "local quadratic is not positive definite; "
                "provide at least dim rows or a positive ridge"
            )
        self.strong_convexity = float(evals[0])
        self.gradient_lipschitz = float(evals[-1])
        # Gradient-norm bound over the unit ball around the local minimizer.
        self.lipschitz_hint = float(evals[-1])
        self._cho = scipy.linalg.cho_factor(self.hessian)
        self._shift = self.scale * (design.T @ targets)

    def value(self, x):
        r = self.design @ x - self.targets
        out = 0.5 * self.scale * float(r @ r)
        if self.ridge:
            out += 0.5 * self.ridge * float(x @ x)
        return out

    def gradient(self, x):
        g = self.scale * (self.design.T @ (self.design @ x - self.targets))
        if self.ridge:
            g = g + self.ridge * x
        return g

    def conjugate_argmax(self, z):
        return scipy.linalg.cho_solve(self._cho, np.asarray(z, dtype=float) + self._shift)


class KLLocal(DualFriendlyObjective):
    r"""KL divergence to a reference distribution on the unit simplex.

    ``f(x) = sum_j x_j log(x_j / q_j)`` for ``x`` in the simplex, where
    ``q`` is strictly positive and sums to one.  The conjugate maximizer is
    the softmax reweighting ``x_j = q_j exp(z_j - m) / sum_k q_k exp(z_k - m)``
    with ``m = max_j z_j``, which is numerically total for any finite ``z``.

    ``strong_convexity`` is reported as 1: on the interior of the simplex
    the Hessian ``diag(1/x)`` dominates the identity along feasible
    directions.  It feeds diagnostics and step-size heuristics only.
    """

    domain = "simplex"

    def __init__(self, reference):
        q = np.atleast_1d(np.asarray(reference, dtype=float))
        if q.ndim != 1 or q.size < 2:
            raise ValueError("reference must be a vector with at least two entries")
        if np.any(q <= 0.0):
            raise ValueError("reference entries must be strictly positive")
        if abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("reference must sum to 1 within 1e-12")
        self.reference = q
        self.dim = q.size
        self.strong_convexity = 1.0
        self.lipschitz_hint = 1.0 + abs(float(np.log(q.min())))

    @classmethod
    def from_weights(cls, weights) -> "KLLocal":
        """Build from positive unnormalized weights."""
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    def value(self, x):
        return float(rel_entr(np.asarray(x, dtype=float), self.reference).sum())

    def gradient(self, x):
        return np.log(np.asarray(x, dtype=float) / self.reference) + 1.0

    def conjugate_argmax(self, z):
        z = np.asarray(z, dtype=float)
        w = self.reference * np.exp(z - z.max())
        return w / w.sum()

    def project(self, x):
        return project_to_simplex(np.asarray(x, dtype=float))

    def initial_point(self):
        return np.full(self.dim, 1.0 / self.dim)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the unit simplex."""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    feasible = u - cumulative / ranks > 0
    rho = ranks[feasible][-1]
    threshold = cumulative[feasible][-1] / rho
    return np.maximum(v - threshold, 0.0)


def _check_stack(objectives, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    total = sum(o.dim for o in objectives)
    if z.size != total:
        raise DimensionMismatch(f"expected {total} stacked entries, got {z.size}")
    return z


def stacked_conjugate(objectives, z: np.ndarray) -> np.ndarray:
    """Per-block conjugate maximizers of a stacked vector.

    Block ``i`` of the result is ``objectives[i].conjugate_argmax(z_i)``;
    blocks are independent, mirroring the agent-local computation.  Errors
    from a block are re-raised with the agent index attached.
    """
    z = _check_stack(objectives, z)
    out = np.empty_like(z)
    offset = 0
    for i, obj in enumerate(objectives):
        block = slice(offset, offset + obj.dim)
        try:
            out[block] = obj.conjugate_argmax(z[block])
        except DualRKError as err:
            err.args = (f"agent {i}: {err}",)
            raise
        offset += obj.dim
    return out


def stacked_value(objectives, x: np.ndarray) -> float:
    """Aggregated objective ``F(x) = sum_i f_i(x_i)`` on a stacked vector."""
    x = _check_stack(objectives, x)
    total = 0.0
    offset = 0
    for obj in objectives:
        total += obj.value(x[offset : offset + obj.dim])
        offset += obj.dim
    return total


def stacked_gradient(objectives, x: np.ndarray) -> np.ndarray:
    """Block-wise gradient of the aggregated objective."""
    x = _check_stack(objectives, x)
    out = np.empty_like(x)
    offset = 0
    for obj in objectives:
        block = slice(offset, offset + obj.dim)
        out[block] = obj.gradient(x[block])
        offset += obj.dim
    return out


def dual_value(
    graph: LaplacianGraph,
    objectives,
    y: np.ndarray,
    sqrt_lap: np.ndarray | None = None,
) -> float:
    """Dual function ``phi(y) = max_x { <y, sqrt(L) x> - F(x) }``.

    Test oracle only: it materializes the Laplacian square root by
    eigendecomposition, so keep the node count small.  ``phi(0)`` equals
    ``-min_x F(x)`` and ``phi(y*) = -F(x*)`` at a consensus-feasible optimum.
    """
    p = objectives[0].dim
    if sqrt_lap is None:
        sqrt_lap = sqrt_laplacian(graph)
    z = sqrt_apply(sqrt_lap, np.asarray(y, dtype=float), p)
    x = stacked_conjugate(objectives, z)
    return float(z @ x) - stacked_value(objectives, x)


def dual_value_transformed(objectives, y_hat: np.ndarray) -> float:
    """Dual value expressed through the transformed variable ``y_hat = sqrt(L) y``.

    ``phi(y) = <y_hat, x*(y_hat)> - F(x*(y_hat))`` needs no square root, so
    it is usable at any scale.
    """
    y_hat = np.asarray(y_hat, dtype=float)
    x = stacked_conjugate(objectives, y_hat)
    return float(y_hat @ x) - stacked_value(objectives, x)


def random_regression_instance(
    n: int, p: int, rows_per_agent: int, seed: int = 0, ridge: float = 0.0
) -> list[QuadraticLocal]:
    """Synthetic least-squares instance with i.i.d. uniform[0, 1] data.

    Each agent holds ``rows_per_agent x p`` design rows and matching targets,
    scaled by ``1 / (n * rows_per_agent)``.  ``rows_per_agent >= p`` keeps the
    local systems positive definite without a ridge.
    """
    if rows_per_agent < p and ridge == 0.0:
        raise ValueError("rows_per_agent < p needs a positive ridge for strong convexity")
    rng = np.random.default_rng((seed, _REGRESSION_STREAM))
    scale = 1.0 / (n * rows_per_agent)
    objectives = []
    for _ in range(n):
        design = rng.uniform(0.0, 1.0, size=(rows_per_agent, p))
        targets = rng.uniform(0.0, 1.0, size=rows_per_agent)
        objectives.append(QuadraticLocal(design, targets, scale=scale, ridge=ridge))
    return objectives


def random_kl_instance(n: int, p: int, seed: int = 0) -> list[KLLocal]:
    """Synthetic KL barycenter instance with well-separated reference masses.

    Reference weights are uniform on ``[0.1, 1]`` before normalization, which
    keeps every distribution bounded away from the simplex boundary.
    """
    rng = np.random.default_rng((seed, _KL_STREAM))
    return [KLLocal.from_weights(rng.uniform(0.1, 1.0, size=p)) for _ in range(n)]


def load_regression_csv(design_path, targets_path, n: int, ridge: float = 0.0) -> list[QuadraticLocal]:
    """Load a least-squares instance from CSV matrices.

    ``design_path`` holds an ``(n * rows) x p`` matrix and ``targets_path`` a
    length ``n * rows`` vector; agent ``i`` receives the ``i``-th row block.
    The standard ``1 / (n * rows)`` scaling is applied.
    """
    design = np.atleast_2d(np.loadtxt(design_path, delimiter=","))
    targets = np.atleast_1d(np.loadtxt(targets_path, delimiter=","))
    if design.shape[0] % n != 0:
        raise DimensionMismatch(f"{design.shape[0]} rows do not split across {n} agents")
    rows = design.shape[0] // n
    scale = 1.0 / (n * rows)
    return [
        QuadraticLocal(
            design[i * rows : (i + 1) * rows],
            targets[i * rows : (i + 1) * rows],
            scale=scale,
            ridge=ridge,
        )
        for i in range(n)
    ]


def load_kl_csv(reference_path) -> list[KLLocal]:
    """Load a KL instance from a CSV with one reference distribution per row."""
    rows = np.atleast_2d(np.loadtxt(reference_path, delimiter=","))
    return [KLLocal(row) for row in rows]
