from __future__ import annotations

import pytest

from wavebound.vorticity import Extension, Piece, VorticityDistribution


def poly_dist(*coeffs, above=None, below=None) -> VorticityDistribution:
    kw = {}
    if above is not None:
        kw["extend_above"] = above
    if below is not None:
        kw["extend_below"] = below
    return VorticityDistribution((Piece(0.0, 1.0, tuple(float(c) for c in coeffs)),), **kw)


def step_dist() -> VorticityDistribution:
    """omega = 1 on [0, 1/2), -1 on [1/2, 1]: discontinuous, Omega peaks at 1/2 with a kink."""
    return VorticityDistribution((Piece(0.0, 0.5, (1.0,)), Piece(0.5, 1.0, (-1.0,))))


@pytest.fixture
def zero():
    return poly_dist(0.0)


@pytest.fixture
def const2():
    return poly_dist(2.0)


@pytest.fixture
def const2_ext():
    """omega = 2 continued by the same constant above the surface value."""
    return poly_dist(2.0, above=Extension.constant(2.0))


@pytest.fixture
def linear():
    return poly_dist(1.0, -2.0)


@pytest.fixture
def six_t():
    return poly_dist(0.0, 6.0)


@pytest.fixture
def step():
    return step_dist()
