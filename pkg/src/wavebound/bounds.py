"""Bounds for periodic free-surface flows checked against stream solutions.

A candidate wave is given as a periodic surface polyline together with
scattered streamfunction samples below it.  The checks compare the samples
with the stream profile U(y; s) whose depth equals the lowest (upper bound)
or highest (lower bound) surface point, and evaluate the head and
surface-height inequalities that accompany those comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import HypothesisViolated, MissingBoundarySamples, NoCheckS, NoStream, SchemaError
from .quadrature import DEFAULT_TOL, excess
from .stream import (
    critical_head,
    depth,
    evaluate_U,
    evaluate_U_many,
    h_zero,
    head_R,
    r_zero,
    solve_depth,
    solve_stream_pair,
)
from .vorticity import VorticityDistribution, s_zero

__all__ = [
    "WaveField",
    "Inequality",
    "BoundsReport",
    "Admissibility",
    "gamma_extrema",
    "check_upper_bound",
    "check_lower_bound",
    "bernoulli_residual",
    "boundary_conditions_residual",
    "head_admissibility",
    "stream_wave_fixture",
]

FIELD_TOL = 1e-6
IDENTITY_TOL = 1e-8
STAGNATION_TOL = 1e-6


def _as_array(rows, width: int, name: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise SchemaError(f"{name} must be a list of {width}-tuples")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} contains non-finite numbers")
    return arr


@dataclass
class WaveField:
    """One period of a candidate wave.

    ``gamma`` holds the surface vertices (first and last differ by one
    period in x), ``samples`` rows are ``(x, y, psi)``.
    """

    lam: float
    gamma: np.ndarray
    samples: np.ndarray
    r: float
    normal_derivs: Optional[np.ndarray] = None
    grad_psi: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gamma = _as_array(self.gamma, 2, "gamma")
        self.samples = _as_array(self.samples, 3, "samples")
        if self.normal_derivs is not None:
            self.normal_derivs = _as_array(self.normal_derivs, 3, "normal_derivs")
        if self.grad_psi is not None:
            self.grad_psi = _as_array(self.grad_psi, 4, "grad_psi")
        if not self.lam > 0:
            raise SchemaError("lambda must be positive")
        if len(self.gamma) < 2:
            raise SchemaError("gamma needs at least two vertices")

    # -- geometry ------------------------------------------------------------

    def _translates(self, shifts=(-2, -1, 0, 1, 2)):
        return [self.gamma + np.array([k * self.lam, 0.0]) for k in shifts]

    def distance_to_gamma(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        best = np.full(len(pts), np.inf)
        for g in self._translates():
            best = np.minimum(best, _dist_to_polyline(pts, g))
        return best

    def contains(self, pts: np.ndarray, tol: float) -> np.ndarray:
        """Points in the closure of the fluid region, up to ``tol``."""
        pts = np.atleast_2d(pts)
        x0 = self.gamma[0, 0]
        xr = x0 + np.mod(pts[:, 0] - x0, self.lam)
        poly = np.vstack([self.gamma, [[self.gamma[-1, 0], 0.0], [x0, 0.0]]])
        inside = np.zeros(len(pts), dtype=bool)
        for k in (-2, -1, 0, 1, 2):
            q = np.column_stack([xr + k * self.lam, pts[:, 1]])
            inside |= _point_in_polygon(q, poly)
        near = self.distance_to_gamma(pts) <= tol
        return (pts[:, 1] >= -tol) & (inside | near)

    def validate(self, tol: float = 1e-9) -> None:
        scale = max(1.0, self.lam, float(np.max(np.abs(self.gamma))))
        shift = self.gamma[-1] - self.gamma[0]
        if abs(shift[0] - self.lam) > tol * scale or abs(shift[1]) > tol * scale:
            raise SchemaError("gamma is not periodic: last vertex must equal first + (lambda, 0)")
        if np.any(self.gamma[:, 1] <= 0):
            raise SchemaError("gamma must stay strictly above the bottom y = 0")
        if len(self.gamma) <= 2000 and _self_intersects(self.gamma):
            raise SchemaError("gamma is not a simple curve")
        ok = self.contains(self.samples[:, :2], tol * scale)
        if not np.all(ok):
            bad = self.samples[~ok][0]
            raise SchemaError(f"sample ({bad[0]}, {bad[1]}) lies outside the fluid region")

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        doc = {
            "lambda": self.lam,
            "r": self.r,
            "gamma": self.gamma.tolist(),
            "samples": self.samples.tolist(),
        }
        if self.normal_derivs is not None:
            doc["normal_derivs"] = self.normal_derivs.tolist()
        if self.grad_psi is not None:
            doc["grad_psi"] = self.grad_psi.tolist()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "WaveField":
        try:
            return cls(
                float(doc["lambda"]),
                doc["gamma"],
                doc["samples"],
                float(doc["r"]),
                doc.get("normal_derivs"),
                doc.get("grad_psi"),
            )
        except KeyError as exc:
            raise SchemaError(f"wave field is missing {exc}") from exc


def _dist_to_polyline(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly[:-1][None, :, :]
    b = poly[1:][None, :, :]
    p = pts[:, None, :]
    ab = b - a
    den = np.sum(ab * ab, axis=-1)
    den = np.where(den > 0, den, 1.0)
    t = np.clip(np.sum((p - a) * ab, axis=-1) / den, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.min(np.linalg.norm(p - proj, axis=-1), axis=1)


def _point_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule; ``poly`` is implicitly closed."""
    x, y = pts[:, 0:1], pts[:, 1:2]
    xa, ya = poly[:, 0][None, :], poly[:, 1][None, :]
    xb, yb = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    crosses = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = xa + (y - ya) * (xb - xa) / (yb - ya)
    return np.sum(crosses & (x < xi), axis=1) % 2 == 1


def _self_intersects(poly: np.ndarray) -> bool:
    a, b = poly[:-1], poly[1:]
    n = len(a)
    if n < 3:
        return False

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A, B = a[:, None], b[:, None]
    C, D = a[None, :], b[None, :]
    d1, d2 = orient(A, B, C), orient(A, B, D)
    d3, d4 = orient(C, D, A), orient(C, D, B)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    i, j = np.triu_indices(n, k=2)
    return bool(np.any(hit[i, j]))


def gamma_extrema(wave: WaveField) -> tuple[float, float]:
    """``(min y, max y)`` over the surface vertices."""
    ys = wave.gamma[:, 1]
    return float(ys.min()), float(ys.max())


@dataclass
class Inequality:
    holds: bool
    margin: float
    strict: bool
    applicable: bool

    @classmethod
    def of(cls, margin: float, tol: float) -> "Inequality":
        return cls(bool(margin >= -tol), float(margin), bool(margin > tol), True)

    @classmethod
    def skipped(cls) -> "Inequality":
        return cls(False, math.nan, False, False)

    def to_json(self) -> dict:
        return {"holds": self.holds, "margin": self.margin, "strict": self.strict, "applicable": self.applicable}


@dataclass
class BoundsReport:
    kind: str
    gamma_check: float
    gamma_hat: float
    s_check: Optional[float] = None
    s_hat: Optional[float] = None
    h0: float = math.inf
    nonstrict_variant: bool = False
    n_checked: int = 0
    min_margin: float = math.inf
    violations: list = field(default_factory=list)
    surface_level_samples: list = field(default_factory=list)
    stagnation_samples: int = 0
    pointwise_strict: bool = False
    ineq_A: Inequality = field(default_factory=Inequality.skipped)
    ineq_B: Inequality = field(default_factory=Inequality.skipped)
    ineq_C: Inequality = field(default_factory=Inequality.skipped)
    ineq_Hplus: Inequality = field(default_factory=Inequality.skipped)
    bernoulli_residual: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ineqs = (self.ineq_A, self.ineq_B, self.ineq_C, self.ineq_Hplus)
        return not self.violations and all(q.holds for q in ineqs if q.applicable)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 2

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "gamma_check": self.gamma_check,
            "gamma_hat": self.gamma_hat,
            "s_check": self.s_check,
            "s_hat": self.s_hat,
            "h0": self.h0,
            "nonstrict_variant": self.nonstrict_variant,
            "n_checked": self.n_checked,
            "min_margin": self.min_margin,
            "violations": [list(v) for v in self.violations],
            "surface_level_samples": [list(v) for v in self.surface_level_samples],
            "stagnation_samples": self.stagnation_samples,
            "pointwise_strict": self.pointwise_strict,
            "ineq_A": self.ineq_A.to_json(),
            "ineq_B": self.ineq_B.to_json(),
            "ineq_C": self.ineq_C.to_json(),
            "ineq_Hplus": self.ineq_Hplus.to_json(),
            "bernoulli_residual": self.bernoulli_residual,
            "notes": list(self.notes),
            "passed": self.passed,
        }


def _stagnant_mask(wave: WaveField, pts: np.ndarray, delta: float) -> np.ndarray:
    if wave.grad_psi is None:
        return np.zeros(len(pts), dtype=bool)
    slow = {
        (float(x), float(y))
        for x, y, gx, gy in wave.grad_psi
        if math.hypot(gx, gy) < delta
    }
    return np.array([(float(x), float(y)) in slow for x, y in pts], dtype=bool)


def _pointwise(report: BoundsReport, wave, pts, psi, U, upper: bool, tol: float, delta: float):
    margins = U - psi if upper else psi - U
    report.n_checked = int(len(pts))
    if len(pts):
        report.min_margin = float(margins.min())
    bad = margins < -tol
    report.violations = [(float(x), float(y), float(m)) for (x, y), m in zip(pts[bad], margins[bad])]
    stag = _stagnant_mask(wave, pts, delta)
    report.stagnation_samples = int(stag.sum())
    report.pointwise_strict = bool(np.all(margins[~stag] > tol))


def _bernoulli_or_none(wave: WaveField) -> Optional[float]:
    if wave.normal_derivs is None:
        return None
    return bernoulli_residual(wave)


def check_upper_bound(
    wave: WaveField,
    dist: VorticityDistribution,
    tol: float = FIELD_TOL,
    ineq_tol: float = IDENTITY_TOL,
    quad_tol: float = DEFAULT_TOL,
    stagnation_tol: float = STAGNATION_TOL,
) -> BoundsReport:
    """Compare psi with U(y; s_check) in the strip below the lowest surface point.

    Also evaluates (A) r >= r_c, (B) H_- <= min surface height and, for
    r <= r0, (C) min surface height <= H_+.
    """
    wave.validate()
    psi = wave.samples[:, 2]
    if psi.max() > 1.0 + tol:
        raise HypothesisViolated(f"psi reaches {psi.max():.6g} > 1")
    g_lo, g_hi = gamma_extrema(wave)
    h0 = h_zero(dist, quad_tol)
    s0, _ = s_zero(dist)
    report = BoundsReport("upper", g_lo, g_hi, h0=h0)

    if math.isfinite(h0) and abs(g_lo - h0) <= tol:
        s_check = s0
        report.nonstrict_variant = True
        report.notes.append("lowest surface point at h0: the comparison is non-strict")
    elif g_lo > h0:
        raise NoCheckS(f"lowest surface height {g_lo!r} exceeds h0={h0!r}")
    else:
        s_check = solve_depth(dist, g_lo, quad_tol)
    report.s_check = s_check

    y = wave.samples[:, 1]
    level = np.abs(y - g_lo) <= 1e-12 * max(1.0, g_lo)
    strip = (y > 0) & (y < g_lo) & ~level
    U, _ = evaluate_U_many(dist, s_check, y[strip], quad_tol)
    _pointwise(report, wave, wave.samples[strip, :2], psi[strip], U, True, tol, stagnation_tol)
    if np.any(level):
        report.surface_level_samples = [
            (float(x), float(yy), float(1.0 - p)) for x, yy, p in wave.samples[level]
        ]

    s_c, r_c = critical_head(dist, quad_tol)
    r0 = r_zero(dist, quad_tol)
    r = wave.r
    report.ineq_A = Inequality.of(r - r_c, ineq_tol)
    try:
        pair = solve_stream_pair(dist, r, quad_tol)
    except NoStream:
        pair = None
        report.notes.append("no stream solution for this head: (B), (C) skipped")
    if pair is not None:
        report.ineq_B = Inequality.of(g_lo - pair.minus.H, ineq_tol)
        if pair.plus is not None:
            report.ineq_C = Inequality.of(pair.plus.H - g_lo, ineq_tol)
    report.bernoulli_residual = _bernoulli_or_none(wave)
    return report


def check_lower_bound(
    wave: WaveField,
    dist: VorticityDistribution,
    tol: float = FIELD_TOL,
    ineq_tol: float = IDENTITY_TOL,
    quad_tol: float = DEFAULT_TOL,
    stagnation_tol: float = STAGNATION_TOL,
) -> BoundsReport:
    """Compare psi with U(y; s_hat) where h(s_hat) is the highest surface point.

    The crest inequality max surface height >= H_+ is evaluated when r <= r0
    and psi <= 1.
    """
    wave.validate()
    psi = wave.samples[:, 2]
    if psi.min() < -tol:
        raise HypothesisViolated(f"psi drops to {psi.min():.6g} < 0")
    g_lo, g_hi = gamma_extrema(wave)
    h0 = h_zero(dist, quad_tol)
    report = BoundsReport("lower", g_lo, g_hi, h0=h0)
    if g_hi >= h0:
        raise NoCheckS(f"highest surface height {g_hi!r} is not below h0={h0!r}")
    s_hat = solve_depth(dist, g_hi, quad_tol)
    report.s_hat = s_hat

    y = wave.samples[:, 1]
    inside = y > 0
    U, _ = evaluate_U_many(dist, s_hat, y[inside], quad_tol)
    _pointwise(report, wave, wave.samples[inside, :2], psi[inside], U, False, tol, stagnation_tol)

    r = wave.r
    r0 = r_zero(dist, quad_tol)
    if r <= r0 and psi.max() <= 1.0 + tol:
        try:
            pair = solve_stream_pair(dist, r, quad_tol)
        except NoStream:
            pair = None
            report.notes.append("no stream solution for this head: crest inequality skipped")
        if pair is not None and pair.plus is not None:
            report.ineq_Hplus = Inequality.of(g_hi - pair.plus.H, ineq_tol)
    report.bernoulli_residual = _bernoulli_or_none(wave)
    return report


def bernoulli_residual(wave: WaveField) -> Optional[float]:
    """max |(d_n psi)^2 + 2y - 3r| over the supplied surface points."""
    if wave.normal_derivs is None or len(wave.normal_derivs) == 0:
        warnings.warn("no normal derivatives supplied; Bernoulli residual unavailable", stacklevel=2)
        return None
    _, y, dn = wave.normal_derivs.T
    return float(np.max(np.abs(dn**2 + 2.0 * y - 3.0 * wave.r)))


def boundary_conditions_residual(wave: WaveField, geom_tol: float = 1e-9) -> tuple[float, float]:
    """``(max |psi| on the bottom, max |psi - 1| on the surface)``."""
    x, y, psi = wave.samples.T
    bottom = np.abs(y) <= geom_tol
    surface = wave.distance_to_gamma(wave.samples[:, :2]) <= geom_tol
    if not np.any(bottom):
        raise MissingBoundarySamples("no samples on the bottom y = 0")
    if not np.any(surface):
        raise MissingBoundarySamples("no samples on the free surface")
    return float(np.max(np.abs(psi[bottom]))), float(np.max(np.abs(psi[surface] - 1.0)))


@dataclass(frozen=True)
class Admissibility:
    geq_rc: bool
    leq_r0: bool
    margins: tuple[float, float]


def head_admissibility(dist: VorticityDistribution, r: float, quad_tol: float = DEFAULT_TOL) -> Admissibility:
    _, r_c = critical_head(dist, quad_tol)
    r0 = r_zero(dist, quad_tol)
    return Admissibility(r >= r_c, r <= r0, (r - r_c, r0 - r))


def stream_wave_fixture(
    dist: VorticityDistribution,
    s: Optional[float] = None,
    r: Optional[float] = None,
    branch: str = "minus",
    lam: float = 1.0,
    nx: int = 65,
    ny: int = 33,
    quad_tol: float = DEFAULT_TOL,
) -> WaveField:
    """A stream solution dressed up as a wave: flat surface, psi = U(y; s).

    Give either ``s`` (then r = R(s)) or ``r`` together with ``branch``.
    """
    if (s is None) == (r is None):
        raise ValueError("give exactly one of s and r")
    if s is None:
        pair = solve_stream_pair(dist, r, quad_tol)
        b = pair.minus if branch == "minus" else pair.plus
        if b is None:
            raise NoStream(f"the {branch} branch does not exist for r={r!r}")
        s, H = b.s, b.H
    else:
        H = depth(dist, s, quad_tol)
        r = head_R(dist, s, quad_tol)
    xs = np.linspace(0.0, lam, nx)
    ys = np.linspace(0.0, H, ny)
    U = np.empty(ny)
    dU = np.empty(ny)
    U[0], dU[0] = 0.0, s
    for k in range(1, ny - 1):
        U[k], dU[k] = evaluate_U(dist, s, float(ys[k]), quad_tol)
    U[-1] = 1.0
    dU[-1] = math.sqrt(max(excess(s, 2.0 * dist.Omega(1.0)), 0.0))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    PSI = np.broadcast_to(U, X.shape)
    DPSI = np.broadcast_to(dU, X.shape)
    samples = np.column_stack([X.ravel(), Y.ravel(), PSI.ravel()])
    grads = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size), DPSI.ravel()])
    gamma = np.column_stack([xs, np.full(nx, H)])
    normal = np.column_stack([xs, np.full(nx, H), np.full(nx, dU[-1])])
    return WaveField(lam, gamma, samples, float(r), normal, grads)
