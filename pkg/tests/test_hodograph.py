from __future__ import annotations

import numpy as np
import pytest

from wavebound.comparison import GridField, NonlinearTerm, weak_residual
from wavebound.errors import DegenerateHp, GradientTooSmall, GridMismatch, OutOfPatch
from wavebound.hodograph import (
    HodographPatch,
    chain_residual,
    ellipticity_certificate,
    forward,
    inverse,
    measure_integral,
    operator_L,
    patch_area,
    patch_from_function,
    reciprocal_residual,
)

ZERO = NonlinearTerm.zero()
TWO = NonlinearTerm.constant(2.0)


def square(fn, m, xmax=1.0, ymax=1.0):
    return GridField.from_function(fn, [0.0, 0.0], [xmax / (m - 1), ymax / (m - 1)], [m, m])


def sine(x, y):
    return y + 0.1 * np.sin(x)


def stream_h(q, p):
    return (3.0 - np.sqrt(9.0 - 4.0 * p)) / 2.0 + 0.0 * q


def test_identity_and_scaling():
    pt = forward(square(lambda x, y: y, 17))
    assert np.allclose(pt.h_values, pt.p_axis[None, :], atol=1e-14)
    pt = forward(square(lambda x, y: 2 * y, 17))
    assert np.allclose(pt.h_values, pt.p_axis[None, :] / 2, atol=1e-14)


def test_sine_forward_exact():
    pt = forward(square(sine, 129, xmax=2.0))
    Q, P = np.meshgrid(pt.q_axis(0), pt.p_axis, indexing="ij")
    assert np.max(np.abs(pt.h_values - (P - 0.1 * np.sin(Q)))) <= 1e-8
    xs = np.linspace(0.0, 2.0, 129)
    lo, hi = pt.metadata["p_interval"]
    assert lo == pytest.approx(0.1 * np.sin(xs).max(), abs=1e-15)
    assert hi == pytest.approx(1.0 + 0.1 * np.sin(xs).min(), abs=1e-15)


def test_gradient_precondition():
    with pytest.raises(GradientTooSmall) as info:
        forward(square(lambda x, y: np.cos(3 * x) * y, 17))
    assert info.value.node is not None
    with pytest.raises(GradientTooSmall):
        forward(square(lambda x, y: 0.5 * y, 9), delta=1.0)


def test_round_trip_linear():
    pt = forward(square(lambda x, y: 2 * y, 33))
    rt = inverse(pt, [0.05, 0.05], [0.07, 0.06], [12, 14])
    assert np.max(np.abs(rt.values - 2 * rt.mesh()[1])) <= 1e-10


def test_round_trip_sine_convergence():
    errs = []
    for m in (33, 65, 129):
        pt = forward(square(sine, m, xmax=2.0))
        rt = inverse(pt, [0.3137, 0.2511], [0.0917, 0.0311], [16, 17])
        errs.append(np.max(np.abs(rt.values - sine(*rt.mesh()))))
    assert errs[0] / errs[1] >= 7 and errs[1] / errs[2] >= 7
    assert errs[2] <= 1e-6


def test_inverse_out_of_patch():
    pt = forward(square(lambda x, y: y, 17))
    with pytest.raises(OutOfPatch):
        inverse(pt, [0.0, 0.5], [0.1, 0.1], [5, 10])
    with pytest.raises(OutOfPatch):
        inverse(pt, [-0.2, 0.1], [0.1, 0.1], [5, 5])


def test_operator_L_examples():
    pt = forward(square(lambda x, y: y, 17))
    assert np.nanmax(np.abs(operator_L(pt, ZERO))) <= 1e-12
    pt = patch_from_function(lambda q, p: p - 0.1 * np.sin(q), [(0, 2, 129)], (0, 1, 65))
    Q, _ = np.meshgrid(pt.q_axis(0), pt.p_axis, indexing="ij")
    assert np.nanmax(np.abs(operator_L(pt, ZERO) - 0.1 * np.sin(Q))) <= 1e-7
    st = patch_from_function(stream_h, [(0, 1, 33)], (0, 1, 257))
    assert np.nanmax(np.abs(operator_L(st, TWO))) <= 1e-8


def test_operator_L_second_order_variant():
    st = patch_from_function(stream_h, [(0, 1, 33)], (0, 1, 257))
    assert np.nanmax(np.abs(operator_L(st, TWO, order=2))) <= 1e-4


def test_degenerate_hp():
    bad = patch_from_function(lambda q, p: (p - 0.5) ** 3 + 0 * q, [(0, 1, 9)], (0, 1, 9))
    with pytest.raises(DegenerateHp):
        operator_L(bad, ZERO)
    good = patch_from_function(lambda q, p: p + 0 * q, [(0, 1, 9)], (0, 1, 9))
    flat = patch_from_function(lambda q, p: np.minimum(p, 0.5) + 0 * q, [(0, 1, 9)], (0, 1, 9))
    with pytest.raises(DegenerateHp):
        ellipticity_certificate(good, flat)


def test_ellipticity_examples():
    a = patch_from_function(lambda q, p: p + 0 * q, [(0, 2, 65)], (0, 1, 65))
    b = patch_from_function(lambda q, p: p - 0.1 * np.sin(q), [(0, 2, 65)], (0, 1, 65))
    c = ellipticity_certificate(a, a)
    assert c.ok and np.allclose(c.lhs, 0) and np.allclose(c.rhs, 1)
    c = ellipticity_certificate(a, b)
    assert c.ok and c.min_gap >= 0.9
    assert np.all(c.lhs <= c.mid + 1e-15)
    with pytest.raises(GridMismatch):
        ellipticity_certificate(a, patch_from_function(lambda q, p: p + 0 * q, [(0, 2, 33)], (0, 1, 65)))


def test_identities_on_sine_and_stream():
    u = square(sine, 129, xmax=2.0)
    pt = forward(u)
    assert np.nanmax(np.abs(reciprocal_residual(u, pt))) <= 1e-6
    assert np.nanmax(np.abs(chain_residual(u, pt)[0])) <= 1e-6
    u = GridField.from_function(lambda x, y: 3 * y - y * y, [0, 0], [1 / 128, 1 / 256], [129, 129])
    pt = forward(u)
    assert np.nanmax(np.abs(reciprocal_residual(u, pt))) <= 1e-6
    assert np.nanmax(np.abs(chain_residual(u, pt)[0])) <= 1e-6


def test_three_dimensional_patch():
    fn = lambda x, y, z: z + 0.1 * np.sin(x) * np.cos(y)
    u = GridField.from_function(fn, [0, 0, 0], [1 / 32] * 3, [33] * 3)
    pt = forward(u)
    assert pt.h_values.shape == (33, 33, 33)
    assert np.nanmax(np.abs(chain_residual(u, pt)[1])) <= 1e-5
    rt = inverse(pt, [0.11, 0.13, 0.3], [0.05, 0.05, 0.02], [10, 10, 10])
    assert np.max(np.abs(rt.values - fn(*rt.mesh()))) <= 1e-6


def test_other_direction():
    u = square(lambda x, y: x + 0.1 * np.sin(y), 65)
    pt = forward(u, axis=0)
    assert pt.direction == 0
    rt = inverse(pt, [0.3, 0.2], [0.02, 0.03], [10, 12])
    X, Y = rt.mesh()
    assert np.max(np.abs(rt.values - (X + 0.1 * np.sin(Y)))) <= 1e-6


def test_measure_factor():
    pt = forward(square(sine, 65, xmax=2.0))
    assert measure_integral(pt) == pytest.approx(patch_area(pt), abs=1e-6)
    st = patch_from_function(stream_h, [(0, 1, 33)], (0, 1, 129))
    assert measure_integral(st) == pytest.approx(stream_h(0, 1.0) - stream_h(0, 0.0), abs=1e-6)


@pytest.mark.parametrize(
    "fn, f",
    [
        (lambda x, y: y, ZERO),
        (sine, ZERO),
        (lambda x, y: 3 * y - y * y, TWO),
    ],
)
def test_sign_transport(fn, f):
    u = square(fn, 65, xmax=2.0, ymax=0.8)
    pt = forward(u)
    weak = -weak_residual(u, f).values / u.cell_volume  # ~ lap u + f(u)
    L = operator_L(pt, f)
    # compare on each patch column at a central p-level, against the node below
    k = pt.p_count // 2
    for i in range(4, pt.q_shape[0] - 4):
        x_n = pt.h_values[i, k]
        j = int(round(x_n / u.spacing[1]))
        w, l = weak[i, j], -L[i, k]
        if abs(w) < 1e-6 and abs(l) < 1e-6:
            continue
        assert np.sign(w) == np.sign(l)


def test_patch_json_round_trip():
    pt = forward(square(sine, 17, xmax=2.0))
    back = HodographPatch.from_json(pt.to_json())
    assert back.same_grid(pt) and np.array_equal(back.h_values, pt.h_values)
