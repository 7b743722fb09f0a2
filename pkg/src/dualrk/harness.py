"""Reference optima, metric evaluation, rate fitting, and theory diagnostics.

Everything downstream of a run lives here: the consensus-problem reference
solution (closed form checked against an independent projected-gradient
solver), the per-iteration metric record and its CSV schema, log-log slope
fitting over trace tails, and the compactness-ball diagnostics.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientData, NonPositiveMetric, SingularSystem
from .graph import LaplacianGraph, laplacian_apply
from .objectives import stacked_conjugate, stacked_gradient, stacked_value

__all__ = [
    "CSV_COLUMNS",
    "MetricsRecord",
    "RateFit",
    "ReferenceOptimum",
    "TheoryDiagnostics",
    "reference_optimum",
    "projected_gradient_optimum",
    "verify_reference",
    "evaluate_metrics",
    "consensus_projection",
    "fit_rate",
    "theory_diagnostics",
    "write_metrics_csv",
    "read_metrics_csv",
    "write_rate_fits_json",
    "write_diagnostics_json",
]

#: Fixed CSV schema shared by the simulator and every baseline.
CSV_COLUMNS = (
    "iteration",
    "comm_rounds",
    "suboptimality",
    "consensus_L_norm",
    "consensus_quadratic",
    "dist_to_optimum_sq",
    "wall_time_ms",
)


@dataclass
class MetricsRecord:
    """One trace row per iteration, uniform across all methods.

    ``suboptimality`` is reported as ``|F(x_k) - F*|`` (the usual figure
    axis); the signed value is kept alongside but is not part of the CSV
    schema.  With ``per_agent_normalized`` reporting, suboptimality and the
    squared distance are divided by the agent count.
    """

    iteration: int
    comm_rounds: int
    suboptimality: float
    consensus_L_norm: float
    consensus_quadratic: float
    dist_to_optimum_sq: float
    wall_time_ms: float = 0.0
    suboptimality_signed: float = field(default=float("nan"), repr=False)


@dataclass(frozen=True)
class ReferenceOptimum:
    """Shared optimizer ``x*`` of the consensus problem and its value ``F*``."""

    x_star: np.ndarray
    f_star: float


@dataclass
class RateFit:
    """Least-squares slope of ``log(metric)`` against ``log(comm_rounds)``."""

    metric: str
    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]
    points: int


@dataclass
class TheoryDiagnostics:
    """Compactness-ball constants and whether observed iterates stayed inside.

    The ball radius is conservative by construction, so staying inside is
    reported, not asserted.  ``strong_convexity`` is exact for quadratic
    families and a documented heuristic (1.0) for simplex KL objectives.
    """

    e_constant: float
    ball_radius: float
    strong_convexity: float
    lambda_max: float
    lambda_min_pos: float
    gradient_norm_at_optimum: float
    consensus_gap: float
    max_observed_distance: float
    all_inside_ball: bool

    def as_dict(self) -> dict:
        return asdict(self)


def reference_optimum(objectives, graph: LaplacianGraph | None = None) -> ReferenceOptimum:
    """Closed-form solution of the consensus problem ``min_x sum_i f_i(x)``.

    Quadratic family: aggregated normal equations.  KL family: normalized
    geometric mean of the reference distributions.  The graph argument is
    accepted for interface symmetry; the optimizer does not depend on it.

    Raises
    ------
    SingularSystem
        If the aggregated quadratic system is not positive definite.
    """
    del graph
    domain = objectives[0].domain
    p = objectives[0].dim
    if domain == "simplex":
        log_mean = np.mean([np.log(obj.reference) for obj in objectives], axis=0)
        weights = np.exp(log_mean - log_mean.max())
        x_star = weights / weights.sum()
    else:
        system = np.zeros((p, p))
        rhs = np.zeros(p)
        for obj in objectives:
            system += obj.hessian
            rhs += obj.scale * (obj.design.T @ obj.targets)
        evals = np.linalg.eigvalsh(system)
        if evals[0] <= p * np.finfo(float).eps * max(evals[-1], 0.0):
            raise SingularSystem("aggregated normal equations are singular; add a ridge")
        x_star = np.linalg.solve(system, rhs)
    f_star = float(sum(obj.value(x_star) for obj in objectives))
    return ReferenceOptimum(x_star=x_star, f_star=f_star)


def projected_gradient_optimum(
    objectives, max_iterations: int = 20_000, polish_iterations: int = 300_000
) -> tuple[np.ndarray, float]:
    """Independent projected-gradient solver for the consensus problem.

    Brute-force oracle: uses only value/gradient/projection, never the
    closed forms, so it can certify :func:`reference_optimum` outputs.  An
    Armijo phase gets near the optimum; value comparisons then drown in
    cancellation noise, so a gradient-only polish phase (fixed step sized
    from a power-iteration curvature estimate) pushes the error to roundoff
    level.  Simplex iterates are floored at 1e-16 (then renormalized) to
    keep the entropy gradient finite.
    """
    simplex = objectives[0].domain == "simplex"
    x = objectives[0].initial_point()

    def total_value(v):
        return float(sum(obj.value(v) for obj in objectives))

    def total_gradient(v):
        return np.sum([obj.gradient(v) for obj in objectives], axis=0)

    def feasible(v):
        v = objectives[0].project(v)
        if simplex:
            v = np.maximum(v, 1e-16)
            v = v / v.sum()
        return v

    def gradient_probe(v):
        # Curvature probes may step slightly outside the simplex interior.
        return total_gradient(np.maximum(v, 1e-12) if simplex else v)

    fx = total_value(x)
    step = 1.0
    for _ in range(max_iterations):
        grad = total_gradient(x)
        while True:
            trial = feasible(x - step * grad)
            diff = trial - x
            f_trial = total_value(trial)
            if f_trial <= fx + float(grad @ diff) + float(diff @ diff) / (2.0 * step) + 1e-18:
                break
            step *= 0.5
            if step < 1e-18:
                break
        if step < 1e-18:
            break
        moved = float(np.linalg.norm(diff))
        x, fx = trial, f_trial
        step = min(step * 1.5, 1e8)
        if moved <= 1e-13 * (1.0 + float(np.linalg.norm(x))):
            break

    # Power iteration on gradient differences estimates the local gradient
    # Lipschitz constant without touching any closed form.
    rng = np.random.default_rng(12345)
    direction = rng.normal(size=x.size)
    direction /= np.linalg.norm(direction)
    probe_eps = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    curvature = 0.0
    for _ in range(15):
        diff = gradient_probe(x + probe_eps * direction) - gradient_probe(x - probe_eps * direction)
        norm_diff = float(np.linalg.norm(diff))
        curvature = max(curvature, norm_diff / (2.0 * probe_eps))
        if norm_diff == 0.0:
            break
        direction = diff / norm_diff
    step = 0.45 / max(curvature, 1e-12)

    for _ in range(polish_iterations):
        trial = feasible(x - step * total_gradient(x))
        moved = float(np.linalg.norm(trial - x))
        scale = 1.0 + float(np.linalg.norm(x))
        if not np.all(np.isfinite(trial)) or moved > 1e3 * scale:
            step *= 0.5  # divergence guard; the curvature estimate was low
            if step < 1e-18:
                break
            continue
        x = trial
        if moved <= 1e-15 * scale:
            break
    return x, total_value(x)


def verify_reference(objectives, reference: ReferenceOptimum) -> float:
    """Distance between the closed-form optimum and the projected-gradient oracle."""
    x_oracle, _ = projected_gradient_optimum(objectives)
    return float(np.linalg.norm(reference.x_star - x_oracle))


def consensus_projection(x_stack: np.ndarray, n: int) -> np.ndarray:
    """Replace every block by the block mean (projection onto consensus)."""
    blocks = np.asarray(x_stack, dtype=float).reshape(n, -1)
    return np.tile(blocks.mean(axis=0), n)


def evaluate_metrics(
    x_stack: np.ndarray,
    reference: ReferenceOptimum,
    graph: LaplacianGraph | None,
    objectives,
    iteration: int,
    comm_rounds: int,
    wall_time_ms: float = 0.0,
    per_agent_normalized: bool = False,
) -> MetricsRecord:
    """Compute the full metric record for a stacked primal iterate.

    ``graph=None`` is allowed for replicated (consensus) stacks, whose
    consensus terms vanish identically; centralized baselines use this.
    """
    x_stack = np.asarray(x_stack, dtype=float)
    n = len(objectives)
    signed = stacked_value(objectives, x_stack) - reference.f_star
    if graph is None:
        consensus_norm = 0.0
        consensus_quad = 0.0
    else:
        lap_x = laplacian_apply(graph, x_stack, objectives[0].dim)
        consensus_norm = float(np.linalg.norm(lap_x))
        consensus_quad = max(float(x_stack @ lap_x), 0.0)
    diff = x_stack - np.tile(reference.x_star, n)
    dist_sq = float(diff @ diff)
    if per_agent_normalized:
        signed /= n
        dist_sq /= n
    return MetricsRecord(
        iteration=iteration,
        comm_rounds=comm_rounds,
        suboptimality=abs(signed),
        consensus_L_norm=consensus_norm,
        consensus_quadratic=consensus_quad,
        dist_to_optimum_sq=dist_sq,
        wall_time_ms=wall_time_ms,
        suboptimality_signed=signed,
    )


def fit_rate(
    records,
    metric: str,
    window_start: float = 0.2,
    min_points: int = 50,
    floor: float = 0.0,
) -> RateFit:
    """Fit the tail log-log slope of a metric against communication rounds.

    The window drops the first ``window_start`` fraction of the round range
    (transient).  Points at or below ``floor`` terminate the window early
    (solver-tolerance plateau); the fit then runs on the pre-floor part.

    Raises
    ------
    NonPositiveMetric
        If no positive points remain in the window.
    InsufficientData
        If fewer than ``min_points`` usable points remain.
    """
    rounds = np.array([r.comm_rounds for r in records], dtype=float)
    values = np.array([getattr(r, metric) for r in records], dtype=float)
    if rounds.size == 0:
        raise InsufficientData("empty trace")
    cutoff = window_start * rounds.max()
    mask = rounds > max(cutoff, 0.0)
    rounds, values = rounds[mask], values[mask]
    bad = np.flatnonzero(values <= floor)
    if bad.size:
        if bad[0] == 0:
            raise NonPositiveMetric(f"{metric} is nonpositive at the window start")
        rounds, values = rounds[: bad[0]], values[: bad[0]]
    if rounds.size < min_points:
        raise InsufficientData(
            f"{rounds.size} usable points in the tail window, need {min_points}"
        )
    log_r = np.log(rounds)
    log_v = np.log(values)
    slope, intercept = np.polyfit(log_r, log_v, 1)
    fitted = slope * log_r + intercept
    residual = float(np.sqrt(np.mean((log_v - fitted) ** 2)))
    return RateFit(
        metric=metric,
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        window=(float(rounds[0]), float(rounds[-1])),
        points=int(rounds.size),
    )


def theory_diagnostics(
    graph: LaplacianGraph,
    objectives,
    records,
    reference: ReferenceOptimum,
    per_agent_normalized: bool = False,
) -> TheoryDiagnostics:
    """Compactness-ball constants and a containment check over a trace.

    The constant combines the dual-optimum norm bound with the gap between
    the consensus-constrained and unconstrained minima of the aggregated
    objective:

        E = e * ( ||grad F(x*)||^2 / lambda_min_pos + gap ) + 1,
        radius = sqrt(2 E lambda_max) / mu.

    When the unconstrained minimum is itself a consensus point, both terms
    vanish and ``E = 1``.
    """
    n = len(objectives)
    p = objectives[0].dim
    mu = min(obj.strong_convexity for obj in objectives)
    x_star_stack = np.tile(reference.x_star, n)
    grad_sq = float(np.sum(stacked_gradient(objectives, x_star_stack) ** 2))
    # Unconstrained minimum of F decouples into per-agent minima, each of
    # which is the conjugate maximizer at zero.
    x_free = stacked_conjugate(objectives, np.zeros(n * p))
    gap = reference.f_star - stacked_value(objectives, x_free)
    e_constant = math.e * (grad_sq / graph.lambda_min_pos + gap) + 1.0
    radius = math.sqrt(2.0 * e_constant * graph.lambda_max) / mu
    scale = n if per_agent_normalized else 1
    max_dist = max((math.sqrt(r.dist_to_optimum_sq * scale) for r in records), default=0.0)
    return TheoryDiagnostics(
        e_constant=e_constant,
        ball_radius=radius,
        strong_convexity=mu,
        lambda_max=graph.lambda_max,
        lambda_min_pos=graph.lambda_min_pos,
        gradient_norm_at_optimum=math.sqrt(grad_sq),
        consensus_gap=gap,
        max_observed_distance=max_dist,
        all_inside_ball=max_dist <= radius,
    )


def write_metrics_csv(records, path, timings: bool = False) -> None:
    """Write a trace in the fixed column schema.

    Timing is volatile, so by default the ``wall_time_ms`` column is written
    as zero, which keeps reruns of a seeded experiment byte-identical; pass
    ``timings=True`` to record the measured values.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    int(rec.iteration),
                    int(rec.comm_rounds),
                    repr(float(rec.suboptimality)),
                    repr(float(rec.consensus_L_norm)),
                    repr(float(rec.consensus_quadratic)),
                    repr(float(rec.dist_to_optimum_sq)),
                    repr(float(rec.wall_time_ms)) if timings else "0.0",
                ]
            )


def read_metrics_csv(path) -> list[MetricsRecord]:
    """Read a trace written by :func:`write_metrics_csv`."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(
                MetricsRecord(
                    iteration=int(row["iteration"]),
                    comm_rounds=int(row["comm_rounds"]),
                    suboptimality=float(row["suboptimality"]),
                    consensus_L_norm=float(row["consensus_L_norm"]),
                    consensus_quadratic=float(row["consensus_quadratic"]),
                    dist_to_optimum_sq=float(row["dist_to_optimum_sq"]),
                    wall_time_ms=float(row["wall_time_ms"]),
                )
            )
    return records


def write_rate_fits_json(fits, path, extra: dict | None = None) -> None:
    """Write rate fits (and optional summary fields) as deterministic JSON."""
    payload = {"fits": [asdict(f) for f in fits]}
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_diagnostics_json(diagnostics: TheoryDiagnostics, path) -> None:
    """Write a theory-diagnostics report as deterministic JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(diagnostics.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
