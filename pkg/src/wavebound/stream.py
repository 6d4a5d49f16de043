"""Stream solutions of u'' + omega(u) = 0 and the head function R(s).

``U(y; s)`` is the monotone solution with U(0) = 0, U'(0) = s, defined
implicitly by ``y = int_0^U dtau / sqrt(s^2 - 2 Omega(tau))``.  The depth
h(s) is the height where U reaches 1 and
``R(s) = (s^2 - 2 Omega(1) + 2 h(s)) / 3`` is the total head of the
corresponding flat-surface flow.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BelowCutoff, NonIntegrable, NoStream, OutOfRange, PlusBranchAbsent, Unbounded
from .quadrature import DEFAULT_TOL, LiftedSpeed, classify_singularity, excess, integrate, integrate_power
from .vorticity import VorticityDistribution, real_roots, s_zero, shift_epsilon

__all__ = [
    "StreamProfile",
    "StreamBranch",
    "StreamPair",
    "DispersionScan",
    "tau_roots",
    "y_extent",
    "depth",
    "depth_slope",
    "h_zero",
    "evaluate_U",
    "evaluate_U_many",
    "head_R",
    "critical_head",
    "r_zero",
    "solve_stream_pair",
    "solve_depth",
    "scan",
    "stream_profile",
    "depth_via_epsilon",
]

_XTOL = 1e-15
_RTOL = 8.9e-16


@lru_cache(maxsize=256)
def _s0(dist: VorticityDistribution):
    return s_zero(dist)


def tau_roots(dist: VorticityDistribution, s: float) -> tuple[float, float]:
    """Largest negative and least positive roots of ``2 Omega(tau) = s^2``.

    Missing roots are reported as -inf / +inf.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    target = 0.5 * s * s
    plus, minus = math.inf, -math.inf
    for seg in dist.segments:
        c = seg.Omega.copy()
        c[0] -= target
        if seg.hi > 0:
            lo = max(seg.lo, 0.0)
            hi = seg.hi if math.isfinite(seg.hi) else max(lo, 0.0) + 1e300
            roots = real_roots(c, lo, hi)
            roots = [lo] if roots is None else roots
            pos = [x for x in roots if x > 0]
            if pos:
                plus = min(plus, pos[0])
        if seg.lo < 0:
            hi = min(seg.hi, 0.0)
            lo = seg.lo if math.isfinite(seg.lo) else min(hi, 0.0) - 1e300
            roots = real_roots(c, lo, hi)
            roots = [hi] if roots is None else roots
            neg = [x for x in roots if x < 0]
            if neg:
                minus = max(minus, neg[-1])
    return minus, plus


@lru_cache(maxsize=4096)
def y_extent(dist: VorticityDistribution, s: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Maximal interval of monotonicity ``(y_-(s), y_+(s))`` of U(.; s).

    Omega grows at most linearly beyond the pieces (the extensions are
    constant), so an infinite root gives a divergent integral.
    """
    t_minus, t_plus = tau_roots(dist, s)
    out = []
    for t, inf in ((t_minus, -math.inf), (t_plus, math.inf)):
        if not math.isfinite(t):
            out.append(inf)
            continue
        try:
            out.append(integrate(dist, s, 0.0, t, tol))
        except NonIntegrable:
            out.append(inf)
    return out[0], out[1]


def _check_cutoff(dist: VorticityDistribution, s: float) -> float:
    s0, _ = _s0(dist)
    if s < s0 * (1.0 - 1e-14) - 1e-300:
        raise BelowCutoff(f"s={s!r} is below the cutoff s0={s0!r}")
    return s0


def depth(dist: VorticityDistribution, s: float, tol: float = DEFAULT_TOL) -> float:
    """h(s) = int_0^1 dtau / sqrt(s^2 - 2 Omega(tau))."""
    s0 = _check_cutoff(dist, s)
    return integrate(dist, max(s, s0), 0.0, 1.0, tol)


def depth_slope(dist: VorticityDistribution, s: float, tol: float = DEFAULT_TOL) -> float:
    """h'(s) = -s int_0^1 (s^2 - 2 Omega)^(-3/2) dtau, for s > s0."""
    _check_cutoff(dist, s)
    return -s * integrate_power(dist, s, 0.0, 1.0, 1.5, tol)


@lru_cache(maxsize=256)
def h_zero(dist: VorticityDistribution, tol: float = DEFAULT_TOL) -> float:
    """Limit of h(s) as s decreases to s0; +inf when the integral diverges."""
    s0, maxima = _s0(dist)
    for lo, hi in maxima:
        if hi > lo:
            return math.inf
        side = "left" if lo >= 1.0 else "right" if lo <= 0.0 else "both"
        if classify_singularity(dist, s0, lo, side).kind == "nonintegrable":
            return math.inf
    try:
        return integrate(dist, s0, 0.0, 1.0, tol)
    except NonIntegrable:
        return math.inf


def _invert(F, dF, target: float, lo: float, hi: float, start: float, ftol: float) -> float:
    """Root of the increasing function ``F - target`` in ``[lo, hi]``.

    Newton steps with bisection fallback whenever the bracket fails to halve
    over two iterations; ``hi`` may be +inf and ``lo``
    may be -inf, in which case the bracket is expanded.
    """
    x = min(max(start, lo), hi) if math.isfinite(lo) and math.isfinite(hi) else start
    widths = [math.inf, math.inf]
    for _ in range(200):
        r = F(x) - target
        if abs(r) <= ftol:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        d = dF(x)
        step = x - r / d if d > 0 and math.isfinite(d) else math.nan
        if math.isfinite(lo) and math.isfinite(hi):
            # bisect when Newton leaves the bracket or stalls (kinks of F')
            if not (lo < step < hi) or hi - lo > 0.5 * widths[0]:
                step = 0.5 * (lo + hi)
            widths = [widths[1], hi - lo]
            if hi - lo <= 4e-16 * max(1.0, abs(lo), abs(hi)):
                return 0.5 * (lo + hi)
        elif not math.isfinite(hi):
            if not step > lo:
                step = lo + 2.0 * max(1.0, abs(lo))
        else:
            if not step < hi:
                step = hi - 2.0 * max(1.0, abs(hi))
        x = step
    return x


def evaluate_U(dist: VorticityDistribution, s: float, y: float, tol: float = DEFAULT_TOL, start: Optional[float] = None) -> tuple[float, float]:
    """Return ``(U(y; s), U'(y; s))`` by inverting the implicit formula."""
    if y == 0.0:
        return 0.0, float(s)
    y_lo, y_hi = y_extent(dist, s, tol)
    if not y_lo < y < y_hi:
        raise OutOfRange(f"y={y!r} outside ({y_lo!r}, {y_hi!r})")
    t_minus, t_plus = tau_roots(dist, s)

    def F(u):
        return integrate(dist, s, 0.0, u, tol)

    def dF(u):
        g = excess(s, 2.0 * dist.Omega(u))
        return 1.0 / math.sqrt(g) if g > 0 else math.inf

    lo, hi = (0.0, t_plus) if y > 0 else (t_minus, 0.0)
    guess = s * y if start is None else start
    U = _invert(F, dF, y, lo, hi, guess, 1e-13 * max(1.0, abs(y)))
    g = excess(s, 2.0 * dist.Omega(U))
    return U, math.sqrt(max(g, 0.0))


def evaluate_U_many(dist: VorticityDistribution, s: float, ys, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Vector version of :func:`evaluate_U`; warm-starts along sorted y."""
    ys = np.asarray(ys, dtype=float)
    flat = ys.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    U = np.empty_like(uniq)
    dU = np.empty_like(uniq)
    prev_y, prev_u, prev_d = 0.0, 0.0, float(s)
    for k in np.argsort(np.abs(uniq), kind="stable"):
        y = float(uniq[k])
        start = None
        if (y > 0) == (prev_y > 0) and prev_y != 0.0:
            start = prev_u + prev_d * (y - prev_y)
        U[k], dU[k] = evaluate_U(dist, s, y, tol, start)
        prev_y, prev_u, prev_d = y, U[k], dU[k]
    return U[inv].reshape(ys.shape), dU[inv].reshape(ys.shape)


def head_R(dist: VorticityDistribution, s: float, tol: float = DEFAULT_TOL) -> float:
    """R(s) = [s^2 - 2 Omega(1) + 2 h(s)] / 3."""
    return (excess(s, 2.0 * dist.Omega(1.0)) + 2.0 * depth(dist, s, tol)) / 3.0


def _dR(dist, s, tol):
    return (2.0 * s + 2.0 * depth_slope(dist, s, tol)) / 3.0


@lru_cache(maxsize=256)
def critical_head(dist: VorticityDistribution, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Location and value ``(s_c, r_c)`` of the minimum of R on (s0, inf).

    The minimum is bracketed by geometric steps away from s0 and located as
    the sign change of R'(s), with h'(s) itself computed by quadrature.
    """
    s0, _ = _s0(dist)
    step = max(s0, 1.0) * 1e-2
    lo = hi = None
    prev = None
    for k in range(80):
        s = s0 + step * 2.0**k
        if _dR(dist, s, tol) > 0:
            hi = s
            lo = prev
            break
        prev = s
    if hi is None:
        raise Unbounded("R(s) kept decreasing over the searched range")
    if lo is None:
        for k in range(1, 60):
            s = s0 + step * 2.0**-k
            if _dR(dist, s, tol) < 0:
                lo = s
                break
            hi = s
        if lo is None:
            raise Unbounded("R(s) increases from s0; no interior minimum found")
    s_c = brentq(lambda x: _dR(dist, x, tol), lo, hi, xtol=_XTOL, rtol=_RTOL, maxiter=300)
    return s_c, head_R(dist, s_c, tol)


@lru_cache(maxsize=256)
def r_zero(dist: VorticityDistribution, tol: float = DEFAULT_TOL) -> float:
    """Limit of R(s) as s decreases to s0 (+inf when h0 is infinite)."""
    h0 = h_zero(dist, tol)
    if not math.isfinite(h0):
        return math.inf
    s0, _ = _s0(dist)
    return (s0 * s0 - 2.0 * dist.Omega(1.0) + 2.0 * h0) / 3.0


@dataclass(frozen=True)
class StreamBranch:
    s: float
    H: float


@dataclass(frozen=True)
class StreamPair:
    r: float
    minus: StreamBranch
    plus: Optional[StreamBranch]
    r_c: float
    r0: float

    def to_json(self) -> dict:
        def br(b):
            return None if b is None else {"s": b.s, "H": b.H}

        return {"r": self.r, "r_c": self.r_c, "r0": self.r0, "minus": br(self.minus), "plus": br(self.plus)}


def _base2(dist: VorticityDistribution) -> float:
    """2 max_[0,1] Omega, evaluated exactly as the quadrature evaluates Omega."""
    _, maxima = _s0(dist)
    return 2.0 * max(max(float(dist.Omega(lo)), float(dist.Omega(hi))) for lo, hi in maxima)


_MIN_LIFT = 1e-60


def _lifted_root(dist: VorticityDistribution, fn, target: float, s_hi: float) -> LiftedSpeed:
    """Root of the decreasing map s -> fn(s) = target on (s0, s_hi].

    Next to s0 the map is steep in s (logarithmically divergent when h0 is
    infinite), so it is solved in t = log(s^2 - s0^2) with s carried as a
    :class:`LiftedSpeed`; adjacent doubles of s would otherwise be too far
    apart to meet the target.
    """
    base2 = _base2(dist)

    def G(t):
        return fn(LiftedSpeed(base2, math.exp(t))) - target

    t_hi = math.log(excess(s_hi, base2))
    if G(t_hi) > 0:
        raise NoStream("the target is not reached below the upper end of the bracket")
    t_floor = math.log(_MIN_LIFT * max(base2, 1.0))
    t_lo = t_hi
    step = 1.0
    while True:
        t_lo = max(t_lo - step, t_floor)
        if G(t_lo) > 0:
            break
        if t_lo == t_floor:
            raise NoStream("the root lies closer to the cutoff than can be resolved")
        step *= 2.0
    t = brentq(G, t_lo, t_hi, xtol=1e-14, rtol=_RTOL, maxiter=300)
    return LiftedSpeed(base2, math.exp(t))


def solve_stream_pair(dist: VorticityDistribution, r: float, tol: float = DEFAULT_TOL, require_plus: bool = False) -> StreamPair:
    """Both stream solutions with total head ``r``.

    The minus branch has s_- >= s_c; the plus branch has s0 <= s_+ <= s_c and
    exists only for r <= r0 (``plus`` is None otherwise, or
    :class:`PlusBranchAbsent` is raised when ``require_plus`` is set).
    """
    s0, _ = _s0(dist)
    s_c, r_c = critical_head(dist, tol)
    r0 = r_zero(dist, tol)
    h0 = h_zero(dist, tol)
    rtol = 1e-12 * max(1.0, abs(r_c))
    if r < r_c - rtol:
        raise NoStream(f"r={r!r} is below the critical head r_c={r_c!r}")
    if abs(r - r_c) <= rtol:
        b = StreamBranch(s_c, depth(dist, s_c, tol))
        return StreamPair(r, b, b, r_c, r0)

    def R(x):
        return head_R(dist, x, tol)

    hi = s_c + max(s_c - s0, 1.0)
    while R(hi) < r:
        hi = s_c + 2.0 * (hi - s_c)
    s_minus = brentq(lambda x: R(x) - r, s_c, hi, xtol=_XTOL, rtol=_RTOL, maxiter=300)
    minus = StreamBranch(s_minus, depth(dist, s_minus, tol))

    plus = None
    if r <= r0 + rtol:
        if abs(r - r0) <= rtol:
            plus = StreamBranch(s0, h0)
        else:
            s_plus = _lifted_root(dist, R, r, s_c)
            plus = StreamBranch(s_plus, depth(dist, s_plus, tol))
    elif require_plus:
        raise PlusBranchAbsent(f"r={r!r} exceeds r0={r0!r}", minus=minus)
    return StreamPair(r, minus, plus, r_c, r0)


def solve_depth(dist: VorticityDistribution, height: float, tol: float = DEFAULT_TOL) -> float:
    """The s > s0 with h(s) = height; requires 0 < height < h0."""
    s0, _ = _s0(dist)
    h0 = h_zero(dist, tol)
    if not 0 < height < h0:
        raise ValueError(f"height {height!r} outside (0, h0={h0!r})")
    hi = max(s0, 1.0) * 2.0
    while depth(dist, hi, tol) > height:
        hi *= 2.0
    return _lifted_root(dist, lambda x: depth(dist, x, tol), height, hi)


@dataclass
class DispersionScan:
    s_grid: np.ndarray
    h_values: np.ndarray
    R_values: np.ndarray
    s0: float
    h0: float
    s_c: float
    r_c: float
    r0: float

    def critical_json(self) -> dict:
        return {"s0": self.s0, "h0": self.h0, "s_c": self.s_c, "r_c": self.r_c, "r0": self.r0}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "h", "R"])
        for row in zip(self.s_grid, self.h_values, self.R_values):
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()


def scan(dist: VorticityDistribution, s_min: float, s_max: float, n: int, tol: float = DEFAULT_TOL) -> DispersionScan:
    if n < 2 or not s_max > s_min:
        raise ValueError("scan needs n >= 2 and s_min < s_max")
    s0, _ = _s0(dist)
    grid = np.linspace(s_min, s_max, n)
    h = np.array([depth(dist, float(s), tol) for s in grid])
    R = (grid**2 - 2.0 * dist.Omega(1.0) + 2.0 * h) / 3.0
    s_c, r_c = critical_head(dist, tol)
    return DispersionScan(grid, h, R, s0, h_zero(dist, tol), s_c, r_c, r_zero(dist, tol))


@dataclass
class StreamProfile:
    s: float
    depth: float
    samples: np.ndarray  # columns y, U, U'
    dist: VorticityDistribution = field(repr=False)


def stream_profile(dist: VorticityDistribution, s: float, n: int = 65, tol: float = DEFAULT_TOL) -> StreamProfile:
    """Tabulate U and U' on ``n`` equally spaced heights in [0, h(s)]."""
    H = depth(dist, s, tol)
    ys = np.linspace(0.0, H, n)
    U = np.empty(n)
    dU = np.empty(n)
    U[0], dU[0] = 0.0, s
    for k in range(1, n - 1):
        U[k], dU[k] = evaluate_U(dist, s, float(ys[k]), tol, U[k - 1] + dU[k - 1] * (ys[k] - ys[k - 1]))
    U[-1] = 1.0
    dU[-1] = math.sqrt(max(excess(s, 2.0 * dist.Omega(1.0)), 0.0))
    return StreamProfile(s, H, np.column_stack([ys, U, dU]), dist)


def depth_via_epsilon(dist: VorticityDistribution, s: float, eps=(4e-6, 1e-6, 2.5e-7), tol: float = DEFAULT_TOL) -> float:
    """Estimate h(s) at or near s0 through shifted distributions omega - eps.

    h computed for omega - eps is regular at s = s0 and behaves like
    h(s) - c*sqrt(eps) + O(eps) there, so the values are extrapolated to
    eps = 0 with a quadratic in sqrt(eps).
    """
    eps = sorted(eps, reverse=True)
    x = np.sqrt(np.array(eps))
    vals = np.array([depth(shift_epsilon(dist, e), s, tol) for e in eps])
    deg = min(2, len(eps) - 1)
    coef = np.polyfit(x, vals, deg)
    return float(np.polyval(coef, 0.0))
