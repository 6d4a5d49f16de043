from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import poly_dist, step_dist
from wavebound.errors import SchemaError
from wavebound.vorticity import (
    Extension,
    Piece,
    VorticityDistribution,
    antiderivative,
    omega_eval,
    real_roots,
    s_zero,
    shift_epsilon,
)


def test_evaluation_examples(zero, const2, six_t):
    assert omega_eval(zero, 0.5) == 0.0
    assert omega_eval(const2, 1.5) == -1.0
    assert omega_eval(six_t, 0.5) == 3.0


def test_extension_conventions(const2):
    assert omega_eval(const2, -0.3) == 0.0
    d = poly_dist(2.0, above=Extension.zero())
    assert omega_eval(d, 3.0) == 0.0
    assert omega_eval(poly_dist(2.0, above=Extension.constant(2.0)), 7.0) == 2.0


def test_antiderivative_examples(zero, const2, six_t):
    assert antiderivative(const2, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert antiderivative(zero, 0.77) == 0.0
    assert antiderivative(six_t, 0.5) == pytest.approx(0.75, abs=1e-15)
    assert antiderivative(six_t, 0.0) == 0.0


def test_antiderivative_continuous_across_breaks(step):
    for b in (0.0, 0.5, 1.0):
        lo, hi = antiderivative(step, b - 1e-12), antiderivative(step, b + 1e-12)
        assert abs(hi - lo) < 1e-11
    # beyond the surface the default extension is -1
    assert antiderivative(step, 1.5) == pytest.approx(0.0 - 0.5, abs=1e-14)


def test_s_zero_examples(zero, const2, linear):
    s0, arg = s_zero(zero)
    assert s0 == 0.0 and arg == [(0.0, 1.0)]
    s0, arg = s_zero(const2)
    assert s0 == pytest.approx(2.0, abs=1e-15) and arg == [(1.0, 1.0)]
    s0, arg = s_zero(linear)
    assert s0 == pytest.approx(math.sqrt(0.5), abs=1e-14)
    assert arg[0][0] == pytest.approx(0.5, abs=1e-12)


def test_s_zero_matches_dense_sampling():
    d = poly_dist(0.3, -4.0, 2.5, 1.0)
    s0, _ = s_zero(d)
    t = np.linspace(0.0, 1.0, 2_000_001)
    sampled = max(0.0, float(d.Omega(t).max()))
    assert sampled <= 0.5 * s0 * s0 + 1e-15
    assert 0.5 * s0 * s0 == pytest.approx(sampled, abs=1e-12)


def test_shift_examples(const2, zero):
    d = shift_epsilon(const2, 0.1)
    assert omega_eval(d, 0.4) == pytest.approx(1.9)
    assert s_zero(d)[0] == pytest.approx(math.sqrt(3.8), abs=1e-12)
    assert s_zero(d)[0] < 2.0
    assert antiderivative(shift_epsilon(zero, 0.1), 1.0) == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        shift_epsilon(zero, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.floats(-0.5, 1.5))
def test_shift_is_additive(e1, e2, t):
    d = step_dist()
    a = shift_epsilon(shift_epsilon(d, e1), e2)
    b = shift_epsilon(d, e1 + e2)
    assert omega_eval(a, t) == pytest.approx(omega_eval(b, t), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 0.3))
def test_shift_lowers_s_zero(eps):
    for d in (poly_dist(2.0), poly_dist(1.0, -2.0), step_dist()):
        assert s_zero(shift_epsilon(d, eps))[0] < s_zero(d)[0]


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_antiderivative_is_exact_integral(a, b):
    d = poly_dist(1.0, -3.0, 0.5)
    exact = lambda t: t - 1.5 * t * t + t**3 / 6.0
    assert d.Omega(b) - d.Omega(a) == pytest.approx(exact(b) - exact(a), abs=1e-15)


def test_validation():
    with pytest.raises(SchemaError):
        VorticityDistribution((Piece(0.0, 0.4, (1.0,)), Piece(0.5, 1.0, (1.0,))))
    with pytest.raises(SchemaError):
        VorticityDistribution((Piece(0.0, 0.9, (1.0,)),))
    with pytest.raises(SchemaError):
        VorticityDistribution.from_json({"pieces": [{"interval": [0, 1]}]})


def test_json_round_trip(step):
    d = shift_epsilon(step, 0.25)
    back = VorticityDistribution.from_json(d.to_json())
    t = np.linspace(-1, 2, 301)
    assert np.array_equal(back.omega(t), d.omega(t))
    assert np.array_equal(back.Omega(t), d.Omega(t))


def test_real_roots():
    assert real_roots((0.0, 0.0), 0.0, 1.0) is None
    assert real_roots((-0.25, 0.0, 1.0), 0.0, 1.0) == pytest.approx([0.5])
    assert real_roots((0.25, -1.0, 1.0), 0.0, 1.0) == pytest.approx([0.5], abs=1e-7)
    assert real_roots((1.0, 0.0, 1.0), -2.0, 2.0) == []
