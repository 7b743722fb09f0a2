"""Config parsing, CLI exit codes, and output determinism."""

import numpy as np
import pytest

from dualrk.cli import main
from dualrk.config import load_config, parse_config_text
from dualrk.errors import ConfigError
from dualrk.harness import read_metrics_csv


def _write_config(path, **overrides):
    base = {
        "experiment": "regression",
        "method": "heavy_ball_rk",
        "graph": "star",
        "n": 5,
        "p": 3,
        "l": 5,
        "order": 2,
        "iterations": 40,
        "seed": 1,
        "ridge": 0.001,
        "out": str(path.parent / "trace.csv"),
    }
    base.update(overrides)
    text = "\n".join(f"{k} = {v}" for k, v in base.items())
    path.write_text(text + "\n")
    return path


def test_parse_config_text_aliases_and_comments():
    raw = parse_config_text(
        """
        # a comment
        N = 12          # trailing comment
        s = 4
        alpha = 0.25
        graph = cycle
        """.replace("N =", "n =")
    )
    assert raw == {"node_count": "12", "order": "4", "step": "0.25", "graph_kind": "cycle"}


def test_parse_config_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_config_text("just words without assignment")


def test_load_config_validates(tmp_path):
    path = _write_config(tmp_path / "cfg.txt")
    cfg = load_config(path)
    assert cfg.node_count == 5 and cfg.order == 2 and cfg.graph_kind == "star"
    _write_config(tmp_path / "bad.txt", method="newton")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.txt")
    _write_config(tmp_path / "bad2.txt", iterations=0)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad2.txt")
    (tmp_path / "bad3.txt").write_text("unknown_key = 1\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad3.txt")


def test_missing_config_exits_2(capsys):
    code = main(["run", "/nonexistent/config.txt"])
    assert code == 2
    assert "/nonexistent/config.txt" in capsys.readouterr().err


def test_dry_run_prints_resolved_step(tmp_path, capsys):
    path = _write_config(tmp_path / "cfg.txt", h0=2.0, order=1, iterations=4)
    assert main(["run", str(path), "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "config ok" in out
    # h = 2 * 4^(-1/2) = 1
    assert "1.000000e+00" in out


def test_run_writes_row_per_iteration(tmp_path, capsys):
    path = _write_config(tmp_path / "cfg.txt", iterations=100, order=1)
    assert main(["run", str(path)]) == 0
    records = read_metrics_csv(tmp_path / "trace.csv")
    assert len(records) == 100
    assert records[-1].comm_rounds == 100  # one stage for order 1
    assert "final:" in capsys.readouterr().out


def test_identical_runs_are_byte_identical(tmp_path):
    path = _write_config(tmp_path / "cfg.txt", iterations=60)
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(path), "--out", str(out_a)]) == 0
    assert main(["run", str(path), "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_seed_override_changes_trace(tmp_path):
    path = _write_config(tmp_path / "cfg.txt", graph="erdos_renyi", edge_probability=0.6)
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(path), "--out", str(out_a)]) == 0
    assert main(["run", str(path), "--out", str(out_b), "--seed", "99"]) == 0
    assert out_a.read_bytes() != out_b.read_bytes()


def test_divergent_run_exits_3(tmp_path, capsys):
    path = _write_config(tmp_path / "cfg.txt", h0=1e6, iterations=200, order=1)
    assert main(["run", str(path)]) == 3
    assert "iteration" in capsys.readouterr().err


def test_baseline_methods_run_from_config(tmp_path):
    for method in ("cgd", "dgd", "dual_nag"):
        path = _write_config(tmp_path / f"{method}.txt", method=method, iterations=30)
        out = tmp_path / f"{method}.csv"
        assert main(["run", str(path), "--out", str(out)]) == 0
        assert len(read_metrics_csv(out)) == 30


def test_kl_experiment_from_config(tmp_path):
    path = _write_config(
        tmp_path / "cfg.txt", experiment="kl_barycenter", method="dgd", iterations=25
    )
    assert main(["run", str(path)]) == 0
    records = read_metrics_csv(tmp_path / "trace.csv")
    assert len(records) == 25


def test_custom_quadratic_dataset(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "h.csv", rng.uniform(size=(8, 2)), delimiter=",")
    np.savetxt(tmp_path / "b.csv", rng.uniform(size=8), delimiter=",")
    path = _write_config(
        tmp_path / "cfg.txt",
        experiment="custom",
        objective="quadratic",
        h_csv=str(tmp_path / "h.csv"),
        b_csv=str(tmp_path / "b.csv"),
        n=4,
        p=2,
        iterations=20,
        method="cgd",
    )
    assert main(["run", str(path)]) == 0


def test_custom_config_requires_paths(tmp_path):
    path = _write_config(tmp_path / "cfg.txt", experiment="custom", objective="quadratic")
    assert main(["run", str(path)]) == 2


def test_custom_tableau_from_file(tmp_path):
    import json

    tab_path = tmp_path / "heun.json"
    tab_path.write_text(json.dumps({"order": 2, "a": [[], [1.0]], "b": [0.5, 0.5]}))
    path = _write_config(tmp_path / "cfg.txt", tableau=str(tab_path), iterations=20)
    out = tmp_path / "heun_trace.csv"
    assert main(["run", str(path), "--out", str(out)]) == 0
    records = read_metrics_csv(out)
    assert records[-1].comm_rounds == 40  # two stages per iteration


def test_verify_command_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
