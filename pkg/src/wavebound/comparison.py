"""Discrete sub/supersolution checks for lap(u) + f(u) = 0 on uniform grids.

Fields are read as continuous piecewise multilinear (Q1) functions.  The
weak residual at an interior node i is

    R_i = int grad(u) . grad(phi_i) - int f(u) phi_i

with phi_i the nodal hat function: the first integral is assembled exactly,
the second with a 3-point tensor Gauss rule per cell.  R_i <= 0 for all i
means u is a (discrete) subsolution, R_i >= 0 a supersolution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EvaluationDomain, GridMismatch, SchemaError
from .vorticity import Extension, Piece, VorticityDistribution

__all__ = [
    "GridField",
    "NonlinearTerm",
    "ComparisonReport",
    "weak_residual",
    "residual_density",
    "default_class_tol",
    "classify",
    "min_gradient",
    "compare_pair",
    "remark1_nonlinearity",
    "remark1_fixture",
]

_GAUSS_X = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0
_ADAPT_DEPTH = 6


@dataclass
class GridField:
    """Scalar values on a uniform n-dimensional grid (row-major)."""

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray
    allow_missing: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.spacing = np.asarray(self.spacing, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = self.values.ndim
        if n < 2 or self.origin.shape != (n,) or self.spacing.shape != (n,):
            raise SchemaError("grid needs n >= 2 and origin/spacing of length n")
        if np.any(self.spacing <= 0):
            raise SchemaError("grid spacing must be positive")
        if min(self.values.shape) < 2:
            raise SchemaError("grid shape must be >= 2 along every axis")
        bad = ~np.isfinite(self.values)
        if self.allow_missing:
            bad &= ~np.isnan(self.values)
        if np.any(bad):
            raise SchemaError("grid values must be finite")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")

    def node_coords(self, index) -> tuple[float, ...]:
        return tuple(float(self.origin[k] + self.spacing[k] * i) for k, i in enumerate(index))

    def same_grid(self, other: "GridField") -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12)
            and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0)
        )

    def with_values(self, values) -> "GridField":
        return GridField(self.origin.copy(), self.spacing.copy(), values)

    @classmethod
    def from_function(cls, fn: Callable, origin: Sequence[float], spacing: Sequence[float], shape: Sequence[int]) -> "GridField":
        axes = [o + h * np.arange(m) for o, h, m in zip(origin, spacing, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(origin, spacing, np.broadcast_to(fn(*mesh), tuple(shape)).copy())

    def to_json(self) -> dict:
        return {
            "origin": self.origin.tolist(),
            "spacing": self.spacing.tolist(),
            "shape": list(self.shape),
            "values": [None if math.isnan(v) else v for v in self.values.ravel().tolist()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GridField":
        try:
            shape = tuple(int(m) for m in doc["shape"])
            values = np.asarray(doc["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed grid field: {exc}") from exc
        if values.size != int(np.prod(shape)):
            raise SchemaError("values length does not match shape")
        return cls(doc["origin"], doc["spacing"], values.reshape(shape))


@dataclass(frozen=True)
class NonlinearTerm:
    """f(u) as a power-law sum ``sum a_i u**p_i`` or a piecewise polynomial."""

    powers: Optional[tuple[tuple[float, float], ...]] = None
    pieces: Optional[VorticityDistribution] = None

    def __post_init__(self):
        if (self.powers is None) == (self.pieces is None):
            raise SchemaError("nonlinear term needs exactly one of powers / pieces")
        if self.powers is not None:
            pw = tuple((float(a), float(p)) for a, p in self.powers)
            if any(p <= 0 for _, p in pw):
                raise SchemaError("power-law exponents must be positive")
            object.__setattr__(self, "powers", pw)

    @classmethod
    def power_law(cls, terms) -> "NonlinearTerm":
        return cls(powers=tuple(terms))

    @classmethod
    def constant(cls, c: float) -> "NonlinearTerm":
        ext = Extension.constant(c)
        return cls(pieces=VorticityDistribution((Piece(0.0, 1.0, (float(c),)),), ext, ext))

    @classmethod
    def zero(cls) -> "NonlinearTerm":
        return cls.constant(0.0)

    @property
    def requires_nonneg(self) -> bool:
        return self.powers is not None

    @property
    def breakpoints(self) -> np.ndarray:
        """Values of u where the piecewise f changes polynomial (jumps or kinks)."""
        if self.pieces is None:
            return np.empty(0)
        segs = self.pieces.segments
        out = []
        for left, right in zip(segs, segs[1:]):
            a, b = np.trim_zeros(left.omega, "b"), np.trim_zeros(right.omega, "b")
            if a.shape != b.shape or not np.allclose(a, b, rtol=0, atol=1e-14):
                out.append(left.hi)
        return np.array(out)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.pieces is not None:
            return self.pieces.omega(u)
        v = np.maximum(u, 0.0)
        out = np.zeros_like(v)
        for a, p in self.powers:
            out = out + a * v**p
        return out

    def to_json(self) -> dict:
        if self.powers is not None:
            return {"powers": [{"coef": a, "exp": p} for a, p in self.powers]}
        return self.pieces.to_json()

    @classmethod
    def from_json(cls, doc: dict) -> "NonlinearTerm":
        if "powers" in doc:
            try:
                return cls.power_law((t["coef"], t["exp"]) for t in doc["powers"])
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"malformed power-law term: {exc}") from exc
        if "pieces" in doc:
            return cls(pieces=VorticityDistribution.from_json(doc))
        raise SchemaError("nonlinear term needs 'powers' or 'pieces'")


# -- weak residual ------------------------------------------------------------

def _apply_1d(arr: np.ndarray, axis: int, kind: str, h: float) -> np.ndarray:
    """Interior rows of the 1D Q1 mass ('M') or stiffness ('K') matrix."""
    a = np.moveaxis(arr, axis, 0)
    left, mid, right = a[:-2], a[1:-1], a[2:]
    if kind == "M":
        out = (h / 6.0) * (left + 4.0 * mid + right)
    else:
        out = (2.0 * mid - left - right) / h
    return np.moveaxis(out, 0, axis)


def _stiffness_term(u: GridField) -> np.ndarray:
    total = 0.0
    for d in range(u.dim):
        arr = u.values
        for k in range(u.dim):
            arr = _apply_1d(arr, k, "K" if k == d else "M", u.spacing[k])
        total = total + arr
    return total


def _corner_bits(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=int)


def _shape_matrix(points: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """phi_c(x_q) for reference points (q, n) and corner bits (c, n)."""
    pts = points[:, None, :]
    return np.prod(np.where(bits[None, :, :] == 1, pts, 1.0 - pts), axis=-1)


def _gauss_points(n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array(list(itertools.product(range(3), repeat=n)), dtype=int)
    return _GAUSS_X[idx], np.prod(_GAUSS_W[idx], axis=1)


def _cell_corners(values: np.ndarray, bits: np.ndarray) -> np.ndarray:
    n = values.ndim
    cols = []
    for b in bits:
        sl = tuple(slice(int(b[k]), values.shape[k] - 1 + int(b[k])) for k in range(n))
        cols.append(values[sl].ravel())
    return np.stack(cols, axis=1)


def _adaptive_loads(corners, f, breaks, bits, gpts, gw, depth=_ADAPT_DEPTH, batch=64):
    """Load contributions of cells where u crosses a break of f.

    Each cell (reference box [0, 1]^n) is bisected along every axis while a
    sub-box still straddles a break, up to ``depth`` levels; the Gauss rule
    is applied on the leaves.  Work is vectorised over all sub-boxes of a
    batch of cells.
    """
    n = bits.shape[1]
    out = np.zeros(corners.shape)
    for start in range(0, len(corners), batch):
        cv = corners[start:start + batch]
        cell = np.arange(len(cv))
        lo = np.zeros((len(cv), n))
        size = 1.0
        for level in range(depth + 1):
            sub = lo[:, None, :] + size * bits[None, :, :]
            phi_sub = _shape_matrix(sub.reshape(-1, n), bits).reshape(len(lo), len(bits), len(bits))
            u_sub = np.einsum("bkc,bc->bk", phi_sub, cv[cell])
            umin, umax = u_sub.min(axis=1), u_sub.max(axis=1)
            split = np.any((umin[:, None] < breaks) & (breaks < umax[:, None]), axis=1)
            if level == depth:
                split[:] = False
            leaf = ~split
            if np.any(leaf):
                pts = lo[leaf][:, None, :] + size * gpts[None, :, :]
                phi = _shape_matrix(pts.reshape(-1, n), bits).reshape(int(leaf.sum()), len(gw), len(bits))
                uq = np.einsum("bqc,bc->bq", phi, cv[cell[leaf]])
                contrib = np.einsum("bq,bqc->bc", f(uq) * gw, phi) * size**n
                np.add.at(out, start + cell[leaf], contrib)
            if not np.any(split):
                break
            lo = (lo[split][:, None, :] + 0.5 * size * bits[None, :, :]).reshape(-1, n)
            cell = np.repeat(cell[split], len(bits))
            size *= 0.5
    return out


def _load_term(u: GridField, f: NonlinearTerm) -> np.ndarray:
    n = u.dim
    bits = _corner_bits(n)
    gpts, gw = _gauss_points(n)
    phi = _shape_matrix(gpts, bits)
    corners = _cell_corners(u.values, bits)
    local = (f(corners @ phi.T) * gw) @ phi

    breaks = f.breakpoints
    if breaks.size:
        cmin, cmax = corners.min(axis=1), corners.max(axis=1)
        flagged = np.nonzero(np.any((cmin[:, None] < breaks) & (breaks < cmax[:, None]), axis=1))[0]
        if flagged.size:
            local[flagged] = _adaptive_loads(corners[flagged], f, breaks, bits, gpts, gw)
    local *= u.cell_volume

    cell_shape = tuple(m - 1 for m in u.shape)
    load = np.zeros(u.shape)
    for j, b in enumerate(bits):
        sl = tuple(slice(int(b[k]), u.shape[k] - 1 + int(b[k])) for k in range(n))
        load[sl] += local[:, j].reshape(cell_shape)
    return load


def weak_residual(u: GridField, f: NonlinearTerm, domain_tol: float = 1e-12) -> GridField:
    """Nodal weak residuals; boundary nodes are NaN."""
    if f.requires_nonneg and u.values.min() < -domain_tol:
        raise EvaluationDomain(f"power-law f needs u >= 0, got min {u.values.min():.3e}")
    stiff = _stiffness_term(u)
    load = _load_term(u, f)
    out = np.full(u.shape, np.nan)
    inner = tuple(slice(1, -1) for _ in range(u.dim))
    out[inner] = stiff - load[inner]
    return GridField(u.origin, u.spacing, out, allow_missing=True)


def residual_density(u: GridField, f: NonlinearTerm) -> np.ndarray:
    """Interior residuals divided by the cell volume (approximates -(lap u + f(u)))."""
    R = weak_residual(u, f).values
    inner = tuple(slice(1, -1) for _ in range(u.dim))
    return R[inner] / u.cell_volume


_MIN_ORDER = 0.25


def default_class_tol(u: GridField, f: NonlinearTerm) -> float:
    """Classification tolerance C * h^q with C and q taken from a coarse/fine pair.

    The field is resampled on every second node.  When the maximal residual
    density drops under refinement, its observed order q (capped at 2) sets
    the scaling; fields with limited smoothness converge slower than h^2.
    A residual that does not drop (q below 1/4) belongs to a field that is
    not a solution, and the nominal order 2 is used.  A factor 2 of slack on
    the fine grid keeps true solutions inside the band.
    """
    h = float(u.spacing.max())
    floor = 1e-10 * (1.0 + float(np.abs(u.values).max())) / float(u.spacing.min()) ** 2
    if min(u.shape) < 5:
        return max(h * h, floor)
    coarse = GridField(u.origin, 2.0 * u.spacing, u.values[tuple(slice(None, None, 2) for _ in range(u.dim))])
    rho_c = float(np.max(np.abs(residual_density(coarse, f))))
    rho_f = float(np.max(np.abs(residual_density(u, f))))
    q = math.log2(rho_c / rho_f) if rho_f > 0 and rho_c > 0 else 2.0
    q = 2.0 if not q >= _MIN_ORDER else min(q, 2.0)
    return max(2.0 * rho_c / 2.0**q, floor)


def classify(u: GridField, f: NonlinearTerm, tol: Optional[float] = None) -> str:
    """'sub', 'super', 'solution' or 'neither' from the signs of the residual density."""
    if tol is None:
        tol = default_class_tol(u, f)
    rho = residual_density(u, f)
    sub = bool(np.all(rho <= tol))
    sup = bool(np.all(rho >= -tol))
    if sub and sup:
        return "solution"
    return "sub" if sub else "super" if sup else "neither"


def min_gradient(u: GridField, exclude_margin: int = 1) -> tuple[float, tuple[float, ...]]:
    """Smallest centred-difference gradient norm over interior nodes."""
    if min(u.shape) < 3:
        raise SchemaError("min_gradient needs at least 3 nodes per axis")
    m = max(int(exclude_margin), 1)
    grads = np.gradient(u.values, *u.spacing)
    mag = np.sqrt(sum(g * g for g in grads))
    inner = tuple(slice(m, s - m) for s in u.shape)
    sub = mag[inner]
    if sub.size == 0:
        raise SchemaError("exclude_margin leaves no nodes")
    k = np.unravel_index(int(np.argmin(sub)), sub.shape)
    return float(sub[k]), u.node_coords(tuple(i + m for i in k))


@dataclass
class ComparisonReport:
    ordering_ok: bool
    touching_points: list
    min_gradient: dict
    classification: dict
    verdict: str
    max_difference: float = 0.0
    class_tol: dict = field(default_factory=dict)

    def to_json(self, max_points: int = 64) -> dict:
        return {
            "ordering_ok": self.ordering_ok,
            "touching_count": len(self.touching_points),
            "touching_points": [list(p) for p in self.touching_points[:max_points]],
            "touching_truncated": len(self.touching_points) > max_points,
            "min_gradient": {k: {"value": v[0], "location": list(v[1])} for k, v in self.min_gradient.items()},
            "classification": dict(self.classification),
            "class_tol": dict(self.class_tol),
            "max_difference": self.max_difference,
            "verdict": self.verdict,
        }


def compare_pair(
    u1: GridField,
    u2: GridField,
    f: NonlinearTerm,
    tol: float = 1e-6,
    class_tol: Optional[float] = None,
    grad_tol: float = 1e-8,
) -> ComparisonReport:
    """Check the hypotheses and the conclusion of the strong comparison principle.

    u1 should be a subsolution, u2 a supersolution, u1 <= u2, both with
    non-vanishing gradients.  Hypotheses are reported in the order
    ordering, gradients, classification; ``inconsistent`` means every
    hypothesis held, the fields touch, and yet they differ.
    """
    if not u1.same_grid(u2):
        raise GridMismatch("fields live on different grids")
    diff = u2.values - u1.values
    ordering_ok = bool(np.all(diff >= -tol))
    inner = tuple(slice(1, -1) for _ in range(u1.dim))
    touch_idx = np.argwhere(np.abs(diff[inner]) <= tol) + 1
    touching = [u1.node_coords(tuple(i)) for i in touch_idx]

    grads = {"u1": min_gradient(u1), "u2": min_gradient(u2)}
    tols = {
        "u1": default_class_tol(u1, f) if class_tol is None else class_tol,
        "u2": default_class_tol(u2, f) if class_tol is None else class_tol,
    }
    cls = {"u1": classify(u1, f, tols["u1"]), "u2": classify(u2, f, tols["u2"])}
    max_diff = float(np.max(np.abs(diff)))

    if not ordering_ok:
        verdict = "hypothesis_failed_order"
    elif min(grads["u1"][0], grads["u2"][0]) <= grad_tol:
        verdict = "hypothesis_failed_gradient"
    elif cls["u1"] not in ("sub", "solution") or cls["u2"] not in ("super", "solution"):
        verdict = "hypothesis_failed_class"
    elif not touching:
        verdict = "consistent_distinct"
    elif max_diff <= tol:
        verdict = "coincide"
    else:
        verdict = "inconsistent"
    return ComparisonReport(ordering_ok, touching, grads, cls, verdict, max_diff, tols)


# -- the vanishing-gradient counterexample -------------------------------------

def remark1_nonlinearity(p: float, n: int) -> NonlinearTerm:
    """f with lap(u) + f(u) = 0 for u = (1 - |x|^2)_+^p in n dimensions.

    Writing w = u^(1/p) = 1 - |x|^2 inside the unit ball,
    lap u = 4p(p-1) w^(p-2) - 2p(n+2p-2) w^(p-1), hence
    f(u) = -4p(p-1) u^(1-2/p) + 2p(n+2p-2) u^(1-1/p).
    """
    if not p > 2:
        raise ValueError("p must exceed 2")
    if n < 2:
        raise ValueError("n must be at least 2")
    return NonlinearTerm.power_law([(-4.0 * p * (p - 1.0), 1.0 - 2.0 / p), (2.0 * p * (n + 2.0 * p - 2.0), 1.0 - 1.0 / p)])


def remark1_fixture(p: float, n: int = 2, box: Optional[Sequence[tuple[float, float]]] = None, spacing: float = 1.0 / 64):
    """``(u1, u2, f)`` with u1 = 0 and u2 = (1 - |x|^2)_+^p on a box around the unit ball."""
    f = remark1_nonlinearity(p, n)
    if box is None:
        box = [(-1.5, 1.5)] * n
    origin = [lo for lo, _ in box]
    shape = [int(round((hi - lo) / spacing)) + 1 for lo, hi in box]
    steps = [spacing] * n

    def bump(*x):
        r2 = sum(xi * xi for xi in x)
        return np.maximum(1.0 - r2, 0.0) ** p

    u2 = GridField.from_function(bump, origin, steps, shape)
    u1 = u2.with_values(np.zeros(u2.shape))
    return u1, u2, f
