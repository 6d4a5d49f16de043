"""Piecewise-polynomial vorticity distributions.

A distribution is a list of contiguous polynomial pieces covering at least
[0, 1], plus constant (or zero) extensions below the first piece and above
the last one.  The antiderivative ``Omega(tau) = int_0^tau omega`` is kept
in closed form on every segment, so values, roots and extrema are exact up
to floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import SchemaError

__all__ = [
    "Extension",
    "Piece",
    "VorticityDistribution",
    "omega_eval",
    "antiderivative",
    "s_zero",
    "shift_epsilon",
    "real_roots",
]

_ZERO_COEF = 1e-300


@dataclass(frozen=True)
class Extension:
    """Rule for omega outside the covered pieces."""

    mode: str = "zero"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("zero", "constant"):
            raise SchemaError(f"unknown extension mode {self.mode!r}")
        if self.mode == "zero" and self.value != 0.0:
            object.__setattr__(self, "value", 0.0)

    @classmethod
    def zero(cls) -> "Extension":
        return cls("zero", 0.0)

    @classmethod
    def constant(cls, value: float) -> "Extension":
        return cls("constant", float(value))

    @property
    def level(self) -> float:
        return self.value if self.mode == "constant" else 0.0

    def to_json(self) -> dict:
        if self.mode == "zero":
            return {"mode": "zero"}
        return {"mode": "constant", "value": self.value}

    @classmethod
    def from_json(cls, doc: dict) -> "Extension":
        if doc.get("mode") == "constant":
            return cls.constant(doc["value"])
        return cls(doc.get("mode", "zero"))


@dataclass(frozen=True)
class Piece:
    a: float
    b: float
    poly: tuple[float, ...]


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    k = len(c)
    while k > 1 and c[k - 1] == 0.0:
        k -= 1
    return c[:k]


def real_roots(coeffs, lo: float, hi: float) -> list[float] | None:
    """Real roots of a monomial-basis polynomial inside ``[lo, hi]``.

    Returns ``None`` when the polynomial vanishes identically.  Roots of even
    multiplicity are kept (they show up with a tiny imaginary part).
    """
    c = _trim(coeffs)
    scale = float(np.max(np.abs(c)))
    if scale <= _ZERO_COEF:
        return None
    c = np.where(np.abs(c) <= 1e-15 * scale, 0.0, c)
    c = _trim(c)
    if len(c) == 1:
        return []
    dc = P.polyder(c)
    out = []
    for z in P.polyroots(c):
        x = float(z.real)
        if abs(z.imag) > 1e-6 * max(1.0, abs(x)):
            continue
        # Newton polish; harmless for multiple roots since we keep the best
        best, best_val = x, abs(P.polyval(x, c))
        for _ in range(4):
            d = P.polyval(x, dc)
            if d == 0.0:
                break
            x = x - P.polyval(x, c) / d
            v = abs(P.polyval(x, c))
            if v < best_val:
                best, best_val = x, v
        x = best
        # complex pairs with a small imaginary part are only kept when the
        # polynomial really touches zero there
        mag = np.abs(c) @ (abs(x) ** np.arange(len(c)))
        if abs(z.imag) > 0 and best_val > 1e-10 * max(mag, 1.0):
            continue
        slack = 1e-12 * max(1.0, abs(x))
        if lo - slack <= x <= hi + slack:
            out.append(min(max(x, lo), hi))
    out.sort()
    merged: list[float] = []
    for x in out:
        if merged and abs(x - merged[-1]) <= 1e-9 * max(1.0, abs(x)):
            continue
        merged.append(x)
    return merged


@dataclass(frozen=True)
class _Segment:
    lo: float
    hi: float
    omega: np.ndarray  # coefficients of omega (shift applied)
    Omega: np.ndarray  # coefficients of the antiderivative with Omega(0) = 0


@dataclass(frozen=True)
class VorticityDistribution:
    """Piecewise polynomial omega with extension rules and a constant shift.

    ``pieces`` is a sequence of ``Piece`` (or ``(a, b, coeffs)`` tuples) in
    ascending order.  The pieces must be contiguous and cover [0, 1].  By
    default omega is extended by -1 above the last piece and by zero below
    the first one; ``epsilon_shift`` is subtracted everywhere.
    """

    pieces: tuple[Piece, ...]
    extend_above: Extension = field(default_factory=lambda: Extension.constant(-1.0))
    extend_below: Extension = field(default_factory=Extension.zero)
    epsilon_shift: float = 0.0

    def __post_init__(self):
        pieces = tuple(
            p if isinstance(p, Piece) else Piece(float(p[0]), float(p[1]), tuple(map(float, p[2])))
            for p in self.pieces
        )
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise SchemaError("vorticity needs at least one piece")
        for p in pieces:
            if not p.b > p.a:
                raise SchemaError(f"empty or reversed interval [{p.a}, {p.b}]")
            if not p.poly:
                raise SchemaError("piece without coefficients")
            if not all(math.isfinite(c) for c in p.poly):
                raise SchemaError("non-finite polynomial coefficient")
        for p, q in zip(pieces, pieces[1:]):
            if p.b != q.a:
                raise SchemaError(f"pieces not contiguous at {p.b} / {q.a}")
        if pieces[0].a > 0.0 or pieces[-1].b < 1.0:
            raise SchemaError("pieces must cover [0, 1]")
        if not (self.epsilon_shift >= 0.0 and math.isfinite(self.epsilon_shift)):
            raise SchemaError("epsilon_shift must be a finite value >= 0")
        object.__setattr__(self, "_segments", self._build_segments())

    # -- construction helpers ------------------------------------------------

    @classmethod
    def constant(cls, value: float, **kw) -> "VorticityDistribution":
        return cls((Piece(0.0, 1.0, (float(value),)),), **kw)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], **kw) -> "VorticityDistribution":
        return cls((Piece(0.0, 1.0, tuple(map(float, coeffs))),), **kw)

    def _build_segments(self) -> tuple[_Segment, ...]:
        eps = self.epsilon_shift
        raw = [(-math.inf, self.pieces[0].a, np.array([self.extend_below.level]))]
        raw += [(p.a, p.b, np.array(p.poly, dtype=float)) for p in self.pieces]
        raw.append((self.pieces[-1].b, math.inf, np.array([self.extend_above.level])))

        omegas = []
        for lo, hi, c in raw:
            c = c.copy()
            c[0] -= eps
            omegas.append(c)
        prims = [P.polyint(c) for c in omegas]

        # Omega at every finite breakpoint, anchored so that Omega(0) = 0
        breaks = [self.pieces[0].a] + [p.b for p in self.pieces]
        vals = [0.0]
        for k, p in enumerate(self.pieces, start=1):
            vals.append(vals[-1] + P.polyval(p.b, prims[k]) - P.polyval(p.a, prims[k]))
        k0 = int(np.searchsorted(breaks, 0.0, side="right")) - 1
        k0 = min(max(k0, 0), len(self.pieces) - 1)
        piece0 = self.pieces[k0]
        at0 = vals[k0] + P.polyval(0.0, prims[k0 + 1]) - P.polyval(piece0.a, prims[k0 + 1])
        vals = [v - at0 for v in vals]

        segs = []
        for k, (lo, hi, _) in enumerate(raw):
            anchor, val = (hi, vals[0]) if k == 0 else (lo, vals[k - 1])
            A = prims[k].copy()
            A[0] += val - P.polyval(anchor, prims[k])
            segs.append(_Segment(lo, hi, omegas[k], A))
        return tuple(segs)

    # -- evaluation ----------------------------------------------------------

    @property
    def segments(self) -> tuple[_Segment, ...]:
        return self._segments  # type: ignore[attr-defined]

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([self.pieces[0].a] + [p.b for p in self.pieces])

    def segment_index(self, t):
        """Segment holding ``t``; pieces are closed on the right at the top."""
        br = self.breakpoints
        k = np.searchsorted(br, t, side="right")
        k = np.where(np.asarray(t) == br[-1], len(br) - 1, k)
        return k

    def _apply(self, t, attr: str):
        t = np.asarray(t, dtype=float)
        k = self.segment_index(t)
        out = np.empty_like(t)
        for j, seg in enumerate(self.segments):
            m = k == j
            if np.any(m):
                out[m] = P.polyval(t[m], getattr(seg, attr))
        return out if out.ndim else float(out)

    def omega(self, t):
        return self._apply(t, "omega")

    def Omega(self, t):
        return self._apply(t, "Omega")

    __call__ = omega

    def Omega_taylor(self, point: float, side: str, order: int = 8) -> np.ndarray:
        """Taylor coefficients of Omega about ``point`` using the piece on ``side``.

        ``side`` is ``"left"`` or ``"right"``; coefficient k multiplies
        ``(tau - point)**k``.
        """
        br = self.breakpoints
        k = int(np.searchsorted(br, point, side="left" if side == "left" else "right"))
        seg = self.segments[k]
        c = seg.Omega
        out = np.zeros(order + 1)
        d = c.copy()
        fact = 1.0
        for j in range(order + 1):
            out[j] = P.polyval(point, d) / fact if len(d) else 0.0
            d = P.polyder(d) if len(d) > 1 else np.array([0.0])
            fact *= j + 1
        return out

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "pieces": [{"interval": [p.a, p.b], "poly": list(p.poly)} for p in self.pieces],
            "extend_above": self.extend_above.to_json(),
            "extend_below": self.extend_below.to_json(),
            "epsilon_shift": self.epsilon_shift,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "VorticityDistribution":
        try:
            pieces = tuple(
                Piece(float(p["interval"][0]), float(p["interval"][1]), tuple(float(c) for c in p["poly"]))
                for p in doc["pieces"]
            )
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise SchemaError(f"malformed vorticity pieces: {exc}") from exc
        above = Extension.from_json(doc["extend_above"]) if "extend_above" in doc else Extension.constant(-1.0)
        below = Extension.from_json(doc["extend_below"]) if "extend_below" in doc else Extension.zero()
        return cls(pieces, above, below, float(doc.get("epsilon_shift", 0.0)))


def omega_eval(dist: VorticityDistribution, t: float) -> float:
    return dist.omega(t)


def antiderivative(dist: VorticityDistribution, tau: float) -> float:
    return dist.Omega(tau)


def s_zero(dist: VorticityDistribution) -> tuple[float, list[tuple[float, float]]]:
    """Cutoff ``s0 = sqrt(2 max_[0,1] Omega)`` and the maximizers of Omega.

    Maximizers come back as ``(lo, hi)`` pairs; isolated points have
    ``lo == hi`` and a stretch where Omega is constant at its maximum is a
    proper interval.
    """
    cand = {0.0, 1.0}
    flat: list[tuple[float, float]] = []
    for seg in dist.segments:
        lo, hi = max(seg.lo, 0.0), min(seg.hi, 1.0)
        if lo >= hi:
            continue
        cand.update((lo, hi))
        roots = real_roots(seg.omega, lo, hi)
        if roots is None:
            flat.append((lo, hi))
        else:
            cand.update(roots)
    pts = sorted(cand)
    vals = np.array([dist.Omega(x) for x in pts])
    M = float(vals.max())
    tol = 1e-13 * max(1.0, abs(M))

    spans = [(lo, hi) for lo, hi in flat if dist.Omega(lo) >= M - tol]
    spans += [(x, x) for x, v in zip(pts, vals) if v >= M - tol]
    spans.sort()
    merged: list[list[float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    s0 = math.sqrt(2.0 * max(M, 0.0))
    return s0, [(lo, hi) for lo, hi in merged]


def shift_epsilon(dist: VorticityDistribution, eps: float) -> VorticityDistribution:
    """Return omega - eps (the shift accumulates on ``epsilon_shift``)."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    return VorticityDistribution(dist.pieces, dist.extend_above, dist.extend_below, dist.epsilon_shift + eps)
