"""Reference optima, metric evaluation, rate fitting, theory diagnostics."""

import math

import numpy as np
import pytest

from dualrk.errors import InsufficientData, NonPositiveMetric
from dualrk.graph import Topology, build_graph, sqrt_apply, sqrt_laplacian
from dualrk.harness import (
    MetricsRecord,
    consensus_projection,
    evaluate_metrics,
    fit_rate,
    projected_gradient_optimum,
    read_metrics_csv,
    reference_optimum,
    theory_diagnostics,
    verify_reference,
    write_metrics_csv,
)
from dualrk.integrator import tableau
from dualrk.objectives import (
    KLLocal,
    QuadraticLocal,
    random_kl_instance,
    random_regression_instance,
    stacked_value,
)
from dualrk.simulator import run_heavy_ball, suggested_h0


def _records_from_curve(rounds, values):
    return [
        MetricsRecord(
            iteration=k + 1,
            comm_rounds=int(r),
            suboptimality=v,
            consensus_L_norm=v,
            consensus_quadratic=v,
            dist_to_optimum_sq=v,
        )
        for k, (r, v) in enumerate(zip(rounds, values))
    ]


def test_reference_identical_quadratics():
    b = np.array([0.7, -0.3])
    objs = [QuadraticLocal(np.eye(2), b) for _ in range(5)]
    ref = reference_optimum(objs)
    assert np.allclose(ref.x_star, b, atol=1e-12)
    assert ref.f_star == pytest.approx(0.0, abs=1e-24)


def test_reference_identical_kl():
    q = np.array([0.1, 0.6, 0.3])
    objs = [KLLocal(q) for _ in range(4)]
    ref = reference_optimum(objs)
    assert np.allclose(ref.x_star, q, atol=1e-14)


def test_reference_kl_symmetric_pair():
    objs = [KLLocal(np.array([0.8, 0.2])), KLLocal(np.array([0.2, 0.8]))]
    ref = reference_optimum(objs)
    assert np.allclose(ref.x_star, [0.5, 0.5], atol=1e-12)
    oracle, _ = projected_gradient_optimum(objs)
    assert np.linalg.norm(oracle - ref.x_star) <= 1e-9


def test_reference_verified_against_oracle():
    for seed in (0, 1):
        objs = random_regression_instance(6, 4, 6, seed=seed)
        assert verify_reference(objs, reference_optimum(objs)) <= 1e-9
        kobs = random_kl_instance(6, 4, seed=seed)
        assert verify_reference(kobs, reference_optimum(kobs)) <= 1e-9


def test_metrics_vanish_at_replicated_optimum():
    objs = random_regression_instance(4, 3, 5, seed=2)
    graph = build_graph(Topology("cycle", 4))
    ref = reference_optimum(objs)
    record = evaluate_metrics(
        np.tile(ref.x_star, 4), ref, graph, objs, iteration=1, comm_rounds=1
    )
    assert record.suboptimality <= 1e-12
    assert record.consensus_L_norm <= 1e-12
    assert record.consensus_quadratic <= 1e-12
    assert record.dist_to_optimum_sq <= 1e-12


def test_metrics_edge_graph_hand_values():
    objs = [QuadraticLocal(np.array([[1.0]]), np.array([0.0])) for _ in range(2)]
    graph = build_graph(Topology("cycle", 2))
    ref = reference_optimum(objs)
    record = evaluate_metrics(
        np.array([1.0, 0.0]), ref, graph, objs, iteration=1, comm_rounds=1
    )
    assert record.consensus_quadratic == pytest.approx(1.0, abs=1e-15)
    assert record.consensus_L_norm == pytest.approx(math.sqrt(2.0), rel=1e-15)


def test_consensus_quadratic_matches_sqrt_oracle():
    graph = build_graph(Topology("erdos_renyi", 8, edge_probability=0.5, rng_seed=3))
    objs = random_regression_instance(8, 3, 5, seed=3)
    ref = reference_optimum(objs)
    root = sqrt_laplacian(graph)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.normal(size=24)
        record = evaluate_metrics(x, ref, graph, objs, iteration=1, comm_rounds=1)
        oracle = float(np.linalg.norm(sqrt_apply(root, x, 3)) ** 2)
        assert record.consensus_quadratic == pytest.approx(oracle, rel=1e-10, abs=1e-10)


def test_consensus_quadratic_sandwich_bounds():
    graph = build_graph(Topology("erdos_renyi", 7, edge_probability=0.6, rng_seed=4))
    objs = random_kl_instance(7, 2, seed=4)
    ref = reference_optimum(objs)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.normal(size=14)
        deviation = float(np.linalg.norm(x - consensus_projection(x, 7)) ** 2)
        record = evaluate_metrics(x, ref, graph, objs, iteration=1, comm_rounds=1)
        assert graph.lambda_min_pos * deviation <= record.consensus_quadratic + 1e-9
        assert record.consensus_quadratic <= graph.lambda_max * deviation + 1e-9


def test_per_agent_normalization():
    objs = random_regression_instance(4, 2, 4, seed=5)
    graph = build_graph(Topology("star", 4))
    ref = reference_optimum(objs)
    x = np.random.default_rng(5).normal(size=8)
    raw = evaluate_metrics(x, ref, graph, objs, iteration=1, comm_rounds=1)
    scaled = evaluate_metrics(
        x, ref, graph, objs, iteration=1, comm_rounds=1, per_agent_normalized=True
    )
    assert scaled.suboptimality == pytest.approx(raw.suboptimality / 4.0)
    assert scaled.dist_to_optimum_sq == pytest.approx(raw.dist_to_optimum_sq / 4.0)
    assert scaled.consensus_quadratic == raw.consensus_quadratic


def test_fit_rate_recovers_exact_power_law():
    rounds = np.arange(1, 2001)
    fit = fit_rate(_records_from_curve(rounds, 3.7 * rounds ** (-4.0 / 3.0)), "suboptimality")
    assert fit.slope == pytest.approx(-4.0 / 3.0, abs=1e-6)
    flat = fit_rate(_records_from_curve(rounds, np.full(2000, 2.5)), "suboptimality")
    assert flat.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_excludes_leading_transient():
    rounds = np.arange(1, 1001)
    values = 2.0 * rounds ** (-1.5)
    values[:150] = 10.0  # transient garbage inside the first 20 percent
    fit = fit_rate(_records_from_curve(rounds, values), "suboptimality")
    assert fit.slope == pytest.approx(-1.5, abs=1e-9)
    assert fit.window[0] > 200.0


def test_fit_rate_insufficient_data():
    rounds = np.arange(1, 30)
    with pytest.raises(InsufficientData):
        fit_rate(_records_from_curve(rounds, 1.0 / rounds), "suboptimality")


def test_fit_rate_nonpositive_and_floor_refit():
    rounds = np.arange(1, 501)
    values = 1.0 * rounds ** (-2.0)
    values[400:] = 0.0  # solver-tolerance floor
    fit = fit_rate(_records_from_curve(rounds, values), "suboptimality")
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.window[1] <= 400.0
    with pytest.raises(NonPositiveMetric):
        fit_rate(_records_from_curve(rounds, np.zeros(500)), "suboptimality")


def test_theory_diagnostics_consensus_attained_minimum():
    # Identical quadratics: the unconstrained minimum is a consensus point
    # and the stacked gradient vanishes there, so E collapses to 1.
    b = np.array([0.4, 0.1])
    objs = [QuadraticLocal(np.eye(2), b) for _ in range(4)]
    graph = build_graph(Topology("cycle", 4))
    ref = reference_optimum(objs)
    diag = theory_diagnostics(graph, objs, [], ref)
    assert diag.e_constant == pytest.approx(1.0, abs=1e-12)
    assert diag.ball_radius == pytest.approx(
        math.sqrt(2.0 * graph.lambda_max) / objs[0].strong_convexity
    )
    assert diag.consensus_gap == pytest.approx(0.0, abs=1e-15)


def test_theory_diagnostics_gap_nonnegative_and_ball_contains_run():
    objs = random_regression_instance(6, 3, 5, seed=6)
    graph = build_graph(Topology("erdos_renyi", 6, edge_probability=0.6, rng_seed=6))
    ref = reference_optimum(objs)
    tab = tableau("rk4")
    result = run_heavy_ball(
        graph, objs, tab, 150, h0=suggested_h0(graph, objs, tab, 150), reference=ref
    )
    diag = theory_diagnostics(graph, objs, result.records, ref)
    assert diag.consensus_gap >= -1e-12
    assert diag.all_inside_ball
    assert diag.max_observed_distance > 0.0
    assert set(diag.as_dict()) >= {"e_constant", "ball_radius", "all_inside_ball"}


def test_consensus_projection_lower_bounded_by_reference():
    objs = random_kl_instance(5, 3, seed=7)
    graph = build_graph(Topology("star", 5))
    ref = reference_optimum(objs)
    tab = tableau("rk4")
    result = run_heavy_ball(
        graph, objs, tab, 40, h0=suggested_h0(graph, objs, tab, 40), reference=ref
    )
    # F at the consensus projection of any iterate is at least F*
    states = result.final_states
    from dualrk.simulator import primal_extract

    x = primal_extract(states, objs)
    projected = consensus_projection(x, 5)
    assert stacked_value(objs, projected) >= ref.f_star - 1e-9


def test_diagnostics_report_roundtrip(tmp_path):
    import json

    from dualrk.harness import write_diagnostics_json

    objs = random_regression_instance(4, 2, 4, seed=8)
    graph = build_graph(Topology("star", 4))
    diag = theory_diagnostics(graph, objs, [], reference_optimum(objs))
    path = tmp_path / "diag.json"
    write_diagnostics_json(diag, path)
    loaded = json.loads(path.read_text())
    assert loaded["e_constant"] == pytest.approx(diag.e_constant)
    assert loaded["all_inside_ball"] is True


def test_csv_timings_flag(tmp_path):
    records = _records_from_curve(np.arange(1, 60), np.linspace(1.0, 0.1, 59))
    for rec in records:
        rec.wall_time_ms = 12.5
    silent, timed = tmp_path / "a.csv", tmp_path / "b.csv"
    write_metrics_csv(records, silent)
    write_metrics_csv(records, timed, timings=True)
    assert all(r.wall_time_ms == 0.0 for r in read_metrics_csv(silent))
    assert all(r.wall_time_ms == 12.5 for r in read_metrics_csv(timed))
