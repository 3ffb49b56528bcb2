import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ternopt.privacy import compose, event_gaps, per_step_delta, sweep_dp, verify_dp_exact


def test_tight_pair():
    gaps = event_gaps(1.0, 0.0, 1.0)
    assert max(gaps.values()) == pytest.approx(1.0, abs=1e-15)
    assert per_step_delta(1.0) == 1.0


def test_opposite_sign_pair():
    gaps = event_gaps(0.4, -0.6, 2.0)
    assert gaps == pytest.approx({"-r": 0.3, "0": 0.1, "+r": 0.2}, abs=1e-15)
    assert max(gaps.values()) <= per_step_delta(2.0)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(1, 50))
def test_gap_bounded_by_delta(u, v, r):
    x = u * r
    y = max(-r, min(r, x + v))
    assert max(event_gaps(x, y, r).values()) <= abs(x - y) / r + 1e-12
    assert max(event_gaps(x, y, r).values()) <= 1 / r + 1e-12


@pytest.mark.parametrize("r", [1.0, 2.0, 5.0, 10.0])
def test_grid_sweep(r):
    sweep = sweep_dp(r, 1e-2)
    assert sweep.max_violation <= 1e-12
    # the bound is attained at unit distance
    assert sweep.max_gap == pytest.approx(1 / r, abs=1e-12)
    assert sweep.pairs > 0


def test_verify_exact_fine_grid():
    assert verify_dp_exact(2.0, 1e-3) <= 1e-12


def test_grid_step_validation():
    with pytest.raises(ValueError):
        sweep_dp(1.0, 0.1)


def test_compose_examples():
    led = compose(1000, 10.0)
    assert led.basic_composition_delta == pytest.approx(100.0)
    assert compose(0, 5.0).basic_composition_delta == 0
    assert "sqrt" in led.sqrt_note
    assert f"{math.sqrt(1000) / 10:.6g}" in led.sqrt_note
    assert led.as_dict()["per_step_delta"] == 0.1


@given(st.integers(0, 10_000), st.floats(0.5, 100))
def test_compose_monotone(T, r):
    assert compose(T + 1, r).basic_composition_delta >= compose(T, r).basic_composition_delta
    assert compose(T, r * 2).basic_composition_delta <= compose(T, r).basic_composition_delta


def test_invalid_inputs():
    with pytest.raises(ValueError):
        per_step_delta(0)
    with pytest.raises(ValueError):
        compose(-1, 1.0)
