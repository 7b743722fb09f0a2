"""Runge-Kutta stepping, tableau validation, and order certification."""

import json
import math

import numpy as np
import pytest

from dualrk.errors import DegenerateError, NonFiniteState
from dualrk.integrator import (
    ButcherTableau,
    CountingField,
    empirical_order,
    format_tableau,
    integrate,
    load_tableau,
    rk_step,
    tableau,
    tableau_for_order,
)


def test_shipped_tableau_coefficients():
    euler = tableau("euler")
    assert euler.stages == 1 and euler.b == (1.0,)
    midpoint = tableau("midpoint")
    assert midpoint.a == ((), (0.5,)) and midpoint.b == (0.0, 1.0)
    rk4 = tableau("rk4")
    assert rk4.a == ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0))
    assert rk4.b == (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)
    assert tableau_for_order(2) is midpoint


def test_exponential_one_step_values():
    state = np.array([1.0])
    growth = lambda s: s
    assert rk_step(tableau("euler"), growth, state, 0.1)[0] == pytest.approx(1.1, abs=1e-15)
    assert rk_step(tableau("midpoint"), growth, state, 0.1)[0] == pytest.approx(1.105, abs=1e-15)
    taylor4 = sum(0.1**k / math.factorial(k) for k in range(5))
    assert rk_step(tableau("rk4"), growth, state, 0.1)[0] == pytest.approx(taylor4, abs=1e-15)


def test_zero_field_keeps_state():
    state = np.array([2.0, -3.0, 0.5])
    for kind in ("euler", "midpoint", "rk4"):
        out = rk_step(tableau(kind), lambda s: np.zeros_like(s), state, 0.3)
        assert np.array_equal(out, state)


def test_euler_is_state_plus_h_field_bitwise():
    rng = np.random.default_rng(0)
    state = rng.normal(size=5)
    field = lambda s: np.sin(s) + 0.5 * s
    h = 0.07
    assert np.array_equal(rk_step(tableau("euler"), field, state, h), state + h * field(state))


def test_rk4_harmonic_oscillator_period():
    def oscillator(state):
        return np.array([state[1], -state[0]])

    h = 2.0 * np.pi / 1000.0
    state = np.array([1.0, 0.0])
    trajectory = integrate(tableau("rk4"), oscillator, state, h, 1000)
    assert np.linalg.norm(trajectory[-1] - state) <= 1e-9


def test_translation_invariant_field_equivariance():
    constant = np.array([0.7, -2.0])
    for kind in ("euler", "midpoint", "rk4"):
        out = rk_step(tableau(kind), lambda s: constant, np.zeros(2), 0.25)
        assert np.abs(out - 0.25 * constant).max() <= 1e-14


def test_exactly_s_field_evaluations():
    for kind, stages in (("euler", 1), ("midpoint", 2), ("rk4", 4)):
        counter = CountingField(lambda s: -s)
        rk_step(tableau(kind), counter, np.ones(3), 0.1)
        assert counter.calls == stages


def test_empirical_order_certifies_shipped_tableaux():
    state = np.array([1.0])
    flow = lambda s, h: s * np.exp(h)
    for kind, order in (("euler", 1), ("midpoint", 2), ("rk4", 4)):
        estimate = empirical_order(tableau(kind), lambda s: s, flow, state)
        assert abs(estimate - order) <= 0.2


def test_empirical_order_degenerate_on_exact_method():
    # Any consistent method integrates a constant field exactly.
    constant_flow = lambda s, h: s + h * np.ones_like(s)
    with pytest.raises(DegenerateError):
        empirical_order(tableau("rk4"), lambda s: np.ones_like(s), constant_flow, np.zeros(2))


def test_tableau_validation():
    with pytest.raises(ValueError):
        ButcherTableau(order=1, a=((0.0,),), b=(1.0,))  # row 0 must be empty
    with pytest.raises(ValueError):
        ButcherTableau(order=2, a=((), ()), b=(0.5, 0.5))  # row 1 needs one entry
    with pytest.raises(ValueError):
        ButcherTableau(order=1, a=((),), b=(0.9,))  # weights must sum to 1
    with pytest.raises(ValueError):
        tableau("rk9")


def test_non_finite_field_raises():
    def exploding(state):
        return state * np.inf

    with pytest.raises(NonFiniteState):
        rk_step(tableau("midpoint"), exploding, np.ones(2), 0.1)


def test_load_tableau_and_format(tmp_path):
    path = tmp_path / "heun.json"
    path.write_text(json.dumps({"order": 2, "a": [[], [1.0]], "b": [0.5, 0.5], "name": "heun"}))
    heun = load_tableau(path)
    assert heun.stages == 2 and heun.order == 2
    estimate = empirical_order(heun, lambda s: s, lambda s, h: s * np.exp(h), np.array([1.0]))
    assert abs(estimate - 2.0) <= 0.2
    rendered = format_tableau(heun)
    assert "heun" in rendered and "0.5" in rendered
