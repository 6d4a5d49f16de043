"""Stream solutions, critical heads and stream-function bounds for steady
water waves with vorticity, plus grid-based checks of a strong comparison
principle and of the partial hodograph transform."""

from __future__ import annotations

from .bounds import WaveField, check_lower_bound, check_upper_bound, stream_wave_fixture
from .comparison import GridField, NonlinearTerm, classify, compare_pair, weak_residual
from .hodograph import HodographPatch, ellipticity_certificate, forward, inverse, operator_L
from .quadrature import LiftedSpeed, classify_singularity, integrate
from .stream import critical_head, depth, evaluate_U, h_zero, r_zero, solve_stream_pair
from .vorticity import Extension, Piece, VorticityDistribution, s_zero

__version__ = "0.1.0"

__all__ = [
    "Extension",
    "Piece",
    "VorticityDistribution",
    "s_zero",
    "LiftedSpeed",
    "integrate",
    "classify_singularity",
    "depth",
    "evaluate_U",
    "h_zero",
    "critical_head",
    "r_zero",
    "solve_stream_pair",
    "WaveField",
    "check_upper_bound",
    "check_lower_bound",
    "stream_wave_fixture",
    "GridField",
    "NonlinearTerm",
    "weak_residual",
    "classify",
    "compare_pair",
    "HodographPatch",
    "forward",
    "inverse",
    "operator_L",
    "ellipticity_certificate",
]
