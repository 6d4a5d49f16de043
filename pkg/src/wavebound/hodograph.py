"""Partial hodograph transform on gridded fields.

With a distinguished axis x_n along which u is strictly increasing, the
new coordinates are q_k = x_k (the other axes) and p = u(x); the unknown
is h(q, p) = x_n.  Then

    h_p = 1 / u_{x_n},    h_{q_k} = -u_{x_k} / u_{x_n},

and lap(u) + f(u) = 0 turns into the quasilinear equation

    L h - f(p) h_p = 0,   L h = sum_k d_{q_k} h_{q_k} - d_p[(1 + |grad_q h|^2) / h_p],

with L h - f h_p = -h_p (lap u + f(u)) pointwise, so supersolutions in x
become L h >= f(p) h_p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .comparison import GridField
from .errors import DegenerateHp, GradientTooSmall, GridMismatch, OutOfPatch, SchemaError

__all__ = [
    "HodographPatch",
    "EllipticityCertificate",
    "forward",
    "inverse",
    "operator_L",
    "ellipticity_certificate",
    "patch_from_function",
    "reciprocal_residual",
    "chain_residual",
    "measure_integral",
    "patch_area",
    "reference_patch_pairs",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_NEWTON_ITERS = 60


@dataclass
class HodographPatch:
    """h(q, p) = x_n on a uniform (q, p) grid; ``h_values`` has shape (*q_shape, p_count)."""

    q_origin: np.ndarray
    q_spacing: np.ndarray
    p_origin: float
    p_spacing: float
    h_values: np.ndarray
    direction: int = -1
    delta: float = 1e-8
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.q_origin = np.atleast_1d(np.asarray(self.q_origin, dtype=float))
        self.q_spacing = np.atleast_1d(np.asarray(self.q_spacing, dtype=float))
        self.h_values = np.asarray(self.h_values, dtype=float)
        nq = self.h_values.ndim - 1
        if nq < 1 or self.q_origin.shape != (nq,) or self.q_spacing.shape != (nq,):
            raise SchemaError("patch needs at least one q axis with matching origin/spacing")
        if np.any(self.q_spacing <= 0) or not self.p_spacing > 0:
            raise SchemaError("patch spacings must be positive")
        if min(self.h_values.shape) < 2 or not np.all(np.isfinite(self.h_values)):
            raise SchemaError("patch values must be finite with >= 2 nodes per axis")
        if not self.delta > 0:
            raise SchemaError("delta must be positive")

    @property
    def dim(self) -> int:
        return self.h_values.ndim

    @property
    def q_shape(self) -> tuple[int, ...]:
        return self.h_values.shape[:-1]

    @property
    def p_count(self) -> int:
        return self.h_values.shape[-1]

    def q_axis(self, k: int) -> np.ndarray:
        return self.q_origin[k] + self.q_spacing[k] * np.arange(self.q_shape[k])

    @property
    def p_axis(self) -> np.ndarray:
        return self.p_origin + self.p_spacing * np.arange(self.p_count)

    def spacings(self) -> tuple[float, ...]:
        return tuple(self.q_spacing) + (self.p_spacing,)

    def same_grid(self, other: "HodographPatch") -> bool:
        return (
            self.h_values.shape == other.h_values.shape
            and np.allclose(self.q_origin, other.q_origin, atol=1e-12)
            and np.allclose(self.q_spacing, other.q_spacing, rtol=1e-12)
            and abs(self.p_origin - other.p_origin) <= 1e-12
            and abs(self.p_spacing - other.p_spacing) <= 1e-12 * self.p_spacing
        )

    def to_json(self) -> dict:
        return {
            "q_grid": {"origin": self.q_origin.tolist(), "spacing": self.q_spacing.tolist(), "shape": list(self.q_shape)},
            "p_grid": {"origin": float(self.p_origin), "spacing": float(self.p_spacing), "count": self.p_count},
            "h_values": self.h_values.ravel().tolist(),
            "direction": int(self.direction),
            "delta": float(self.delta),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "HodographPatch":
        try:
            qg, pg = doc["q_grid"], doc["p_grid"]
            shape = tuple(int(m) for m in qg["shape"]) + (int(pg["count"]),)
            vals = np.asarray(doc["h_values"], dtype=float)
            if vals.size != int(np.prod(shape)):
                raise SchemaError("h_values length does not match grid shape")
            return cls(
                qg["origin"], qg["spacing"], float(pg["origin"]), float(pg["spacing"]),
                vals.reshape(shape), int(doc.get("direction", -1)), float(doc.get("delta", 1e-8)),
                dict(doc.get("metadata", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed hodograph patch: {exc}") from exc


# -- monotone column inversion --------------------------------------------------

def _hermite_monotone(x: np.ndarray, Y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Per column: is the cubic Hermite interpolant increasing on every cell?"""
    dx = np.diff(x)
    y0, y1 = Y[:, :-1], Y[:, 1:]
    m0, m1 = d[:, :-1] * dx, d[:, 1:] * dx
    # derivative in t on [0, 1] is the quadratic a t^2 + b t + c
    a = 6 * (y0 - y1) + 3 * (m0 + m1)
    b = 6 * (y1 - y0) - 4 * m0 - 2 * m1
    c = m0
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(a != 0, -b / (2 * a), 0.0)
    inside = (tv > 0) & (tv < 1)
    dv = a * tv * tv + b * tv + c
    ok = (m0 > 0) & (m1 > 0) & (~inside | (dv > 0))
    return np.all(ok, axis=1)


def _monotone_slopes(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Node slopes of the not-a-knot spline, or of PCHIP where the spline is not monotone."""
    d = CubicSpline(x, Y, axis=1)(x, 1) if len(x) >= 4 else np.zeros(Y.shape)
    bad = ~_hermite_monotone(x, Y, d) if len(x) >= 4 else np.ones(Y.shape[0], dtype=bool)
    if np.any(bad):
        d[bad] = PchipInterpolator(x, Y[bad], axis=1).derivative()(x)
    return d


def _invert_columns(x: np.ndarray, Y: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Solve P_c(s) = targets[c, m] for every column c of increasing data Y[c].

    P_c is a monotone cubic through (x, Y[c]); targets must lie in
    [Y[c, 0], Y[c, -1]].  Safeguarded Newton on the located Hermite cell.
    """
    ncol, N = Y.shape
    d = _monotone_slopes(x, Y)
    j = np.empty(targets.shape, dtype=int)
    for c in range(ncol):
        j[c] = np.searchsorted(Y[c], targets[c], side="right") - 1
    np.clip(j, 0, N - 2, out=j)
    rows = np.arange(ncol)[:, None]
    y0, y1 = Y[rows, j], Y[rows, j + 1]
    dx = x[j + 1] - x[j]
    m0, m1 = d[rows, j] * dx, d[rows, j + 1] * dx

    def hermite(t):
        t2, t3 = t * t, t * t * t
        val = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1
        der = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1
        return val - targets, der

    lo = np.zeros(targets.shape)
    hi = np.ones(targets.shape)
    span = y1 - y0
    t = np.clip(np.where(span > 0, (targets - y0) / np.where(span > 0, span, 1.0), 0.5), 0.0, 1.0)
    for _ in range(_NEWTON_ITERS):
        g, dg = hermite(t)
        lo = np.where(g < 0, t, lo)
        hi = np.where(g > 0, t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / dg
        tn = t - step
        bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        if np.all(np.abs(tn - t) <= 1e-15):
            t = tn
            break
        t = tn
    return x[j] + t * dx


def _restrict(u: GridField, box) -> tuple[np.ndarray, list[np.ndarray]]:
    axes = [u.axis(k) for k in range(u.dim)]
    if box is None:
        return u.values, axes
    if len(box) != u.dim:
        raise SchemaError("box needs one (lo, hi) pair per axis")
    sl = []
    for k, (lo, hi) in enumerate(box):
        eps = 1e-9 * u.spacing[k]
        idx = np.nonzero((axes[k] >= lo - eps) & (axes[k] <= hi + eps))[0]
        if idx.size < 4:
            raise SchemaError(f"box keeps fewer than 4 nodes on axis {k}")
        sl.append(slice(idx[0], idx[-1] + 1))
        axes[k] = axes[k][sl[-1]]
    return u.values[tuple(sl)], axes


def forward(
    u: GridField,
    box: Optional[Sequence[tuple[float, float]]] = None,
    p_count: Optional[int] = None,
    delta: float = 1e-8,
    axis: int = -1,
) -> HodographPatch:
    """Hodograph patch of ``u`` on ``box`` with ``p_count`` uniform p-levels."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    vals, axes = _restrict(u, box)
    axis = axis % u.dim
    spacing = u.spacing[axis]
    grad = np.gradient(vals, spacing, axis=axis, edge_order=2)
    if grad.min() < delta:
        k = np.unravel_index(int(np.argmin(grad)), grad.shape)
        node = tuple(float(axes[a][i]) for a, i in enumerate(k))
        raise GradientTooSmall(f"u_x{axis} = {grad[k]:.3e} < delta = {delta:.3e} at {node}", node=node)

    V = np.moveaxis(vals, axis, -1)
    q_axes = [axes[a] for a in range(u.dim) if a != axis]
    xn = axes[axis]
    cols = V.reshape(-1, V.shape[-1])
    if np.any(np.diff(cols, axis=1) <= 0):
        raise GradientTooSmall("u is not strictly increasing along the distinguished axis")
    p_lo, p_hi = float(cols[:, 0].max()), float(cols[:, -1].min())
    if not p_hi > p_lo:
        raise GradientTooSmall("columns share no common range of u")
    P = int(p_count) if p_count is not None else V.shape[-1]
    if P < 2:
        raise ValueError("p_count must be at least 2")
    p_axis = np.linspace(p_lo, p_hi, P)
    H = _invert_columns(xn, cols, np.broadcast_to(p_axis, (cols.shape[0], P)))
    meta = {
        "p_interval": [p_lo, p_hi],
        "column_range_min": float(cols[:, 0].min()),
        "column_range_max": float(cols[:, -1].max()),
        "source_min_u_xn": float(grad.min()),
    }
    return HodographPatch(
        np.array([a[0] for a in q_axes]),
        np.array([u.spacing[a] for a in range(u.dim) if a != axis]),
        p_lo,
        (p_hi - p_lo) / (P - 1),
        H.reshape(V.shape[:-1] + (P,)),
        axis,
        delta,
        meta,
    )


def _q_interp(patch: HodographPatch, q_targets: Sequence[np.ndarray]) -> np.ndarray:
    """h at tensor-product q targets, every p-level; not-a-knot cubic per q axis."""
    H = patch.h_values
    for k, qt in enumerate(q_targets):
        qa = patch.q_axis(k)
        qt = np.asarray(qt, dtype=float)
        eps = 1e-9 * patch.q_spacing[k]
        if qt.size and (qt.min() < qa[0] - eps or qt.max() > qa[-1] + eps):
            raise OutOfPatch(f"q_{k} targets leave [{qa[0]}, {qa[-1]}]")
        if len(qa) < 4:
            raise SchemaError("cubic q-interpolation needs at least 4 nodes per axis")
        H = CubicSpline(qa, H, axis=k, bc_type="not-a-knot")(np.clip(qt, qa[0], qa[-1]))
    return H


def inverse(
    patch: HodographPatch,
    origin: Sequence[float],
    spacing: Sequence[float],
    shape: Sequence[int],
) -> GridField:
    """Rebuild u on a target grid (original axis order) from a patch."""
    n = patch.dim
    if len(origin) != n or len(spacing) != n or len(shape) != n:
        raise SchemaError("target grid has the wrong dimension")
    axis = patch.direction % n
    axes = [origin[k] + spacing[k] * np.arange(shape[k]) for k in range(n)]
    q_t = [axes[a] for a in range(n) if a != axis]
    xn_t = axes[axis]
    Hq = _q_interp(patch, q_t)
    cols = Hq.reshape(-1, patch.p_count)
    if np.any(np.diff(cols, axis=1) <= 0):
        raise DegenerateHp("interpolated h is not increasing in p")
    eps = 1e-12 * max(1.0, float(np.abs(cols).max()))
    if xn_t.min() < cols[:, 0].max() - eps or xn_t.max() > cols[:, -1].min() + eps:
        raise OutOfPatch("target x_n values leave the image of the patch")
    targets = np.clip(np.broadcast_to(xn_t, (cols.shape[0], len(xn_t))), cols[:, :1], cols[:, -1:])
    U = _invert_columns(patch.p_axis, cols, targets)
    U = U.reshape(Hq.shape[:-1] + (len(xn_t),))
    return GridField(origin, spacing, np.moveaxis(U, -1, axis))


# -- derivatives -----------------------------------------------------------------

def _diff(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """First derivative; centred of the given order inside, 2nd-order one-sided at edges."""
    out = np.gradient(a, h, axis=axis, edge_order=2)
    if order == 4 and a.shape[axis] >= 5:
        m = np.moveaxis(a, axis, 0)
        o = np.moveaxis(out, axis, 0)
        o[2:-2] = (m[:-4] - 8.0 * m[1:-3] + 8.0 * m[3:-1] - m[4:]) / (12.0 * h)
    elif order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    return out


def _gradients(patch: HodographPatch, order: int) -> tuple[list[np.ndarray], np.ndarray]:
    H = patch.h_values
    hq = [_diff(H, patch.q_spacing[k], k, order) for k in range(patch.dim - 1)]
    hp = _diff(H, patch.p_spacing, patch.dim - 1, order)
    return hq, hp


def operator_L(patch: HodographPatch, f: Callable, order: int = 4) -> np.ndarray:
    """Residual ``L h - f(p) h_p`` on patch nodes.

    Nodes closer to an edge than two stencil half-widths (where the outer
    difference would read one-sided inner derivatives) are NaN.
    """
    hq, hp = _gradients(patch, order)
    if np.any(hp <= 0):
        k = np.unravel_index(int(np.argmin(hp)), hp.shape)
        raise DegenerateHp(f"h_p = {hp[k]:.3e} <= 0 at node {tuple(int(i) for i in k)}")
    flux = (1.0 + sum(g * g for g in hq)) / hp
    Lh = -_diff(flux, patch.p_spacing, patch.dim - 1, order)
    for k, g in enumerate(hq):
        Lh = Lh + _diff(g, patch.q_spacing[k], k, order)
    p = patch.p_axis.reshape((1,) * (patch.dim - 1) + (-1,))
    res = Lh - np.asarray(f(np.broadcast_to(p, hp.shape)), dtype=float) * hp
    return _mask_margin(res, 4 if order == 4 else 2)


@dataclass
class EllipticityCertificate:
    lhs: np.ndarray
    mid: np.ndarray
    rhs: np.ndarray
    node_ok: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.node_ok))

    @property
    def min_gap(self) -> float:
        return float(np.min(self.rhs - self.lhs))

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "min_gap": self.min_gap,
            "max_lhs": float(self.lhs.max()),
            "min_rhs": float(self.rhs.min()),
            "chain_ordered": bool(np.all(self.lhs <= self.mid * (1 + 1e-12) + 1e-300)),
        }


def ellipticity_certificate(h1: HodographPatch, h2: HodographPatch, order: int = 2) -> EllipticityCertificate:
    """Per-node check of the coefficient bound for the difference of two patches.

    Along h_t = t h1 + (1 - t) h2 it evaluates
        lhs = sum_k (int h_{t,q_k}/h_{t,p} dt)^2,
        mid = sum_k int (h_{t,q_k}/h_{t,p})^2 dt,
        rhs = int (1 + |grad_q h_t|^2)/h_{t,p}^2 dt
    with 8-point Gauss-Legendre in t; lhs <= mid by Cauchy-Schwarz and
    mid < rhs because the integrand gap is 1/h_{t,p}^2.
    """
    if not h1.same_grid(h2):
        raise GridMismatch("patches live on different grids")
    q1, p1 = _gradients(h1, order)
    q2, p2 = _gradients(h2, order)
    for t in (0.0, 0.5, 1.0):
        hp = t * p1 + (1.0 - t) * p2
        if np.any(hp <= 0):
            k = np.unravel_index(int(np.argmin(hp)), hp.shape)
            raise DegenerateHp(f"h_p = {hp[k]:.3e} <= 0 at t={t}, node {tuple(int(i) for i in k)}")
    lhs_parts = [np.zeros(p1.shape) for _ in q1]
    mid = np.zeros(p1.shape)
    rhs = np.zeros(p1.shape)
    for t, w in zip(_GL_T, _GL_W):
        hp = t * p1 + (1.0 - t) * p2
        grad2 = np.zeros(p1.shape)
        for k in range(len(q1)):
            g = t * q1[k] + (1.0 - t) * q2[k]
            lhs_parts[k] += w * g / hp
            mid += w * (g / hp) ** 2
            grad2 += g * g
        rhs += w * (1.0 + grad2) / hp**2
    lhs = sum(a * a for a in lhs_parts)
    return EllipticityCertificate(lhs, mid, rhs, lhs < rhs)


# -- helpers ---------------------------------------------------------------------

def patch_from_function(
    h_fn: Callable,
    q_box: Sequence[tuple[float, float, int]],
    p_range: tuple[float, float, int],
    direction: int = -1,
    delta: float = 1e-8,
) -> HodographPatch:
    """Patch sampled from an analytic h(q_1, ..., q_{n-1}, p)."""
    q_axes = [np.linspace(lo, hi, m) for lo, hi, m in q_box]
    p_axis = np.linspace(*p_range[:2], int(p_range[2]))
    mesh = np.meshgrid(*q_axes, p_axis, indexing="ij")
    H = np.broadcast_to(h_fn(*mesh), mesh[0].shape).copy()
    return HodographPatch(
        np.array([a[0] for a in q_axes]),
        np.array([a[1] - a[0] for a in q_axes]),
        float(p_axis[0]),
        float(p_axis[1] - p_axis[0]),
        H,
        direction,
        delta,
    )


def _source_derivative_at(u: GridField, deriv_axis: int, patch: HodographPatch) -> np.ndarray:
    """u_{x_deriv_axis} evaluated at x(q, p) = (q, h(q, p)) for every patch node."""
    n = u.dim
    axis = patch.direction % n
    du = CubicSpline(u.axis(deriv_axis), u.values, axis=deriv_axis)(u.axis(deriv_axis), 1)
    D = np.moveaxis(du, axis, -1)
    q_src = [u.axis(a) for a in range(n) if a != axis]
    # restrict to the patch q nodes (patch q nodes are source nodes)
    idx = []
    for k, qa in enumerate(q_src):
        pq = patch.q_axis(k)
        i = np.rint((pq - qa[0]) / u.spacing[[a for a in range(n) if a != axis][k]]).astype(int)
        if np.any(i < 0) or np.any(i >= len(qa)) or not np.allclose(qa[i], pq, atol=1e-9):
            raise GridMismatch("patch q nodes are not source grid nodes")
        idx.append(i)
    D = D[np.ix_(*idx, np.arange(D.shape[-1]))]
    cols = D.reshape(-1, D.shape[-1])
    H = patch.h_values.reshape(-1, patch.p_count)
    xn = u.axis(axis)
    out = np.array([CubicSpline(xn, cols[c])(H[c]) for c in range(cols.shape[0])])
    return out.reshape(patch.h_values.shape)


def reciprocal_residual(u: GridField, patch: HodographPatch, order: int = 4) -> np.ndarray:
    """``h_p * u_{x_n} - 1`` at interior patch nodes (NaN on the margin)."""
    _, hp = _gradients(patch, order)
    r = hp * _source_derivative_at(u, patch.direction % u.dim, patch) - 1.0
    return _mask_margin(r, 2 if order == 4 else 1)


def chain_residual(u: GridField, patch: HodographPatch, order: int = 4) -> list[np.ndarray]:
    """``u_{x_k} + h_{q_k}/h_p`` for each q axis (NaN on the margin)."""
    hq, hp = _gradients(patch, order)
    axis = patch.direction % u.dim
    others = [a for a in range(u.dim) if a != axis]
    out = []
    for k, a in enumerate(others):
        r = _source_derivative_at(u, a, patch) + hq[k] / hp
        out.append(_mask_margin(r, 2 if order == 4 else 1))
    return out


def _mask_margin(a: np.ndarray, m: int) -> np.ndarray:
    out = np.full(a.shape, np.nan)
    inner = tuple(slice(m, s - m) for s in a.shape)
    out[inner] = a[inner]
    return out


def _simpson_nd(vals: np.ndarray, spacings: Sequence[float]) -> float:
    from scipy.integrate import simpson

    out = vals
    for k in range(vals.ndim - 1, -1, -1):
        out = simpson(out, dx=spacings[k], axis=k)
    return float(out)


def measure_integral(patch: HodographPatch, g: Optional[Callable] = None, order: int = 4) -> float:
    """``int g(q, p) h_p dq dp`` over the patch (Simpson), i.e. ``int g dx`` over its image."""
    _, hp = _gradients(patch, order)
    if g is None:
        vals = hp
    else:
        mesh = np.meshgrid(*[patch.q_axis(k) for k in range(patch.dim - 1)], patch.p_axis, indexing="ij")
        vals = np.asarray(g(*mesh), dtype=float) * hp
    return _simpson_nd(vals, patch.spacings())


def patch_area(patch: HodographPatch) -> float:
    """Volume of the patch image in x-space, ``int (h(q, p_max) - h(q, p_min)) dq``."""
    height = patch.h_values[..., -1] - patch.h_values[..., 0]
    return _simpson_nd(height, tuple(patch.q_spacing))


def reference_patch_pairs(q_count: int = 65, p_count: int = 65) -> list[tuple[str, HodographPatch, HodographPatch]]:
    """Named patch pairs on a common grid q in [0, 2], p in [0, 1].

    They include the identity profile h = p, the transformed harmonic field
    y + 0.1 sin x, the stream profile of 3y - y^2 and two mixed pairs.
    """
    q_box = [(0.0, 2.0, q_count)]
    p_rng = (0.0, 1.0, p_count)
    ident = patch_from_function(lambda q, p: p + 0.0 * q, q_box, p_rng)
    sine = patch_from_function(lambda q, p: p - 0.1 * np.sin(q), q_box, p_rng)
    stream_ = patch_from_function(lambda q, p: (3.0 - np.sqrt(9.0 - 4.0 * p)) / 2.0 + 0.0 * q, q_box, p_rng)
    half = patch_from_function(lambda q, p: 0.5 * p + 0.0 * q, q_box, p_rng)
    wavy = patch_from_function(lambda q, p: p - 0.2 * np.sin(q) * np.cos(p), q_box, p_rng)
    return [
        ("identity/identity", ident, ident),
        ("identity/sine", ident, sine),
        ("stream/identity", stream_, ident),
        ("sine/stream", sine, stream_),
        ("half/wavy", half, wavy),
    ]
