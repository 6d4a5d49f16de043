"""Singular quadrature of ``int dtau / sqrt(s^2 - 2 Omega(tau))``.

The range is split at piece boundaries and at critical points of Omega, so
on every panel the radicand is a smooth polynomial that is monotone.  Each
panel is integrated with a tanh-sinh rule.  The radicand at a node is
evaluated from its Taylor expansion about the nearer panel end, in powers of
the distance to that end, which keeps inverse-square-root endpoint zeros
free of cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainViolation, NonIntegrable
from .vorticity import VorticityDistribution, real_roots

__all__ = ["SingularityClass", "LiftedSpeed", "excess", "integrate", "integrate_power", "classify_singularity", "DEFAULT_TOL"]

DEFAULT_TOL = 1e-10
_T_MAX = 4.5
_MAX_LEVEL = 11


@dataclass(frozen=True)
class SingularityClass:
    kind: str  # "regular" | "inverse_sqrt" | "nonintegrable"
    location: float
    exponent: float


class LiftedSpeed(float):
    """A speed s whose square is carried as ``base2 + lift`` without rounding.

    Close to the cutoff, s^2 - 2 Omega is far smaller than the spacing of
    doubles near s^2, so a plain float s cannot resolve it.  ``base2`` is
    2 max Omega and ``lift`` = s^2 - base2 keeps full relative precision.
    """

    __slots__ = ("base2", "lift")

    def __new__(cls, base2: float, lift: float):
        if not lift >= 0.0:
            raise ValueError("lift must be non-negative")
        obj = super().__new__(cls, math.sqrt(base2 + lift))
        obj.base2 = float(base2)
        obj.lift = float(lift)
        return obj

    def __reduce__(self):
        return (LiftedSpeed, (self.base2, self.lift))


def excess(s: float, value: float) -> float:
    """``s^2 - value``, computed as ``(base2 - value) + lift`` for a lifted s."""
    if isinstance(s, LiftedSpeed):
        return (s.base2 - value) + s.lift
    return s * s - value


def _zero_tol(s: float) -> float:
    return max(1e-14 * s * s, 1e-30)


def _shift(c: np.ndarray, x0: float) -> np.ndarray:
    """Coefficients of ``c(x0 + d)`` as a polynomial in ``d``."""
    out = np.zeros(len(c))
    d = np.asarray(c, dtype=float)
    fact = 1.0
    for j in range(len(c)):
        out[j] = P.polyval(x0, d) / fact
        d = P.polyder(d) if len(d) > 1 else np.zeros(1)
        fact *= j + 1
    return out


def _multiplicity(g: np.ndarray, scale: float) -> float:
    """Order of the zero of a Taylor series whose constant term is zero."""
    thresh = 1e-10 * max(scale, 1e-300)
    for k in range(1, len(g)):
        if abs(g[k]) > thresh:
            return float(k)
    return math.inf


def classify_singularity(dist: VorticityDistribution, s: float, point: float, side: str = "both") -> SingularityClass:
    """Classify the behaviour of ``1/sqrt(s^2 - 2 Omega)`` at ``point``.

    A positive radicand is ``regular``.  Otherwise the radicand is expanded
    in exact polynomial derivatives on the requested side(s); a simple zero
    gives exponent 1/2 (``inverse_sqrt``) and a zero of multiplicity m gives
    exponent m/2, non-integrable once m >= 2.
    """
    g0 = excess(s, 2.0 * dist.Omega(point))
    zt = _zero_tol(s)
    if g0 > (0.0 if isinstance(s, LiftedSpeed) else zt):
        return SingularityClass("regular", point, 0.0)
    if g0 < -zt:
        raise DomainViolation(f"radicand {g0:.3e} < 0 at tau={point}")
    sides = ("left", "right") if side == "both" else (side,)
    exponent = 0.0
    for sd in sides:
        g = -2.0 * dist.Omega_taylor(point, sd)
        g[0] = 0.0
        scale = max(s * s, float(np.max(np.abs(g))), 1.0)
        exponent = max(exponent, 0.5 * _multiplicity(g, scale))
    kind = "nonintegrable" if exponent >= 1.0 else "inverse_sqrt"
    return SingularityClass(kind, point, exponent)


def _panels(dist: VorticityDistribution, a: float, b: float) -> list[tuple[float, float, np.ndarray]]:
    """Split [a, b] into panels on which Omega is a monotone polynomial."""
    out = []
    for seg in dist.segments:
        lo, hi = max(seg.lo, a), min(seg.hi, b)
        if not hi > lo:
            continue
        cuts = [lo, hi]
        roots = real_roots(seg.omega, lo, hi)
        if roots:
            cuts += [r for r in roots if lo < r < hi]
        cuts = sorted(set(cuts))
        for x0, x1 in zip(cuts, cuts[1:]):
            if x1 - x0 > 1e-15 * max(1.0, abs(x0)):
                out.append((x0, x1, seg.Omega))
    return out


def _end_expansion(s: float, Om: np.ndarray, x0: float, inward: int, power: float) -> np.ndarray:
    """Taylor series of the radicand about a panel end, checked for integrability.

    ``inward`` is +1 at the left end and -1 at the right end.
    """
    g = -2.0 * _shift(Om, x0)
    g[0] = excess(s, -g[0])
    if abs(g[0]) <= _zero_tol(s) and not (isinstance(s, LiftedSpeed) and g[0] > 0):
        g[0] = 0.0
        scale = max(s * s, float(np.max(np.abs(g))), 1.0)
        m = _multiplicity(g, scale)
        if m * power >= 1.0:
            raise NonIntegrable(f"zero of order {m:g} of the radicand at tau={x0}")
        if g[int(m)] * inward ** int(m) < 0:
            raise DomainViolation(f"radicand turns negative next to tau={x0}")
    elif g[0] < 0:
        raise DomainViolation(f"radicand {g[0]:.3e} < 0 at tau={x0}")
    return g


def _tanh_sinh_panel(ga: np.ndarray, gb: np.ndarray, length: float, power: float, tol: float) -> float:
    half = 0.5 * length

    def level_sum(t: np.ndarray) -> float:
        at = np.abs(t)
        u = 0.5 * math.pi * np.sinh(at)
        em = np.exp(-2.0 * u)
        comp = 2.0 * em / (1.0 + em)  # 1 - |x|
        sech2 = 4.0 * em / (1.0 + em) ** 2
        w = half * 0.5 * math.pi * np.cosh(t) * sech2
        near = half * comp
        rad = np.where(t >= 0, P.polyval(-near, gb), P.polyval(near, ga))
        keep = w > 0
        if np.any(rad[keep] <= 0):
            raise DomainViolation("radicand is not positive at an interior quadrature node")
        return float(np.sum(w[keep] * rad[keep] ** (-power)))

    h = 1.0
    t = np.arange(-_T_MAX, _T_MAX + 0.5 * h, h)
    total = level_sum(t)
    est = h * total
    for _ in range(_MAX_LEVEL):
        h *= 0.5
        t_new = np.arange(-_T_MAX + h, _T_MAX, 2.0 * h)
        total += level_sum(t_new)
        new = h * total
        if abs(new - est) <= max(0.1 * tol, 4e-16 * abs(new)):
            return new
        est = new
    return est


def integrate_power(dist: VorticityDistribution, s: float, a: float, b: float, power: float = 0.5, tol: float = DEFAULT_TOL) -> float:
    """``int_a^b (s^2 - 2 Omega)^(-power) dtau`` for finite a, b (sign-aware)."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if a == b:
        return 0.0
    if a > b:
        return -integrate_power(dist, s, b, a, power, tol)
    panels = _panels(dist, a, b)
    tol_each = tol / max(len(panels), 1)
    total = 0.0
    for x0, x1, Om in panels:
        ga = _end_expansion(s, Om, x0, +1, power)
        gb = _end_expansion(s, Om, x1, -1, power)
        total += _tanh_sinh_panel(ga, gb, x1 - x0, power, tol_each)
    return total


def integrate(dist: VorticityDistribution, s: float, a: float, b: float, tol: float = DEFAULT_TOL) -> float:
    """``int_a^b dtau / sqrt(s^2 - 2 Omega(tau))`` within absolute error ``tol``."""
    return integrate_power(dist, s, a, b, 0.5, tol)
