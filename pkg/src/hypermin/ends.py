"""Standard ends ``E_(p,q)``, end-type classification and trapping slabs."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DomainError
from .hyperbolic import CuspModel
from .mesh import TriMesh, grid_faces

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndType:
    p: int
    q: int

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q:
            raise DomainError("end type entries must be integers")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        if self.p == 0 and self.q == 0:
            raise DomainError("type (0,0): a compact lifted boundary cannot bound a proper end")

    @property
    def kind(self):
        if self.q == 0:
            return "horizontal"
        if self.p == 0:
            return "vertical"
        return "helicoidal"

    def slope(self, model: CuspModel):
        """``qh / (p tau)``; undefined for vertical ends."""
        if self.p == 0:
            raise DomainError("vertical ends have no slope")
        return self.q * model.h / (self.p * model.tau)

    def functional(self, model: CuspModel, x, t):
        """``s(x, t) = p tau t - q h x``."""
        return self.p * model.tau * np.asarray(t) - self.q * model.h * np.asarray(x)


@dataclass(frozen=True)
class StandardEnd:
    """``constant`` is ``t0`` for ``(p, 0)``, ``x0`` for ``(0, q)`` and ``c0`` otherwise."""

    kind: EndType
    constant: float
    model: CuspModel

    @property
    def c0(self):
        p, q = self.kind.p, self.kind.q
        if q == 0:
            return p * self.model.tau * self.constant
        if p == 0:
            return -q * self.model.h * self.constant
        return self.constant

    def residual(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.abs(self.kind.functional(self.model, pts[..., 0], pts[..., 2]) - self.c0)

    def distance(self, pts, iters=90):
        """Product-metric distance from points to the end surface (``y`` unrestricted).

        For a foot point over ``x'`` the best height is free, and the planar
        part reduces to the distance to the vertical geodesic, ``asinh(|x - x'|/y)``.
        The remaining one-dimensional problem is solved by golden section.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
        p, q = self.kind.p, self.kind.q
        ptau, qh = p * self.model.tau, q * self.model.h
        if q == 0:
            return np.abs(t - self.constant)
        if p == 0:
            return np.arcsinh(np.abs(x - self.constant) / y)

        def f(xp):
            tp = (self.c0 + qh * xp) / ptau
            return np.arcsinh(np.abs(x - xp) / y) ** 2 + (t - tp) ** 2

        # optimum lies between x and the foot with matching t
        x_star = (ptau * t - self.c0) / qh
        lo, hi = np.minimum(x, x_star), np.maximum(x, x_star)
        g = (math.sqrt(5) - 1) / 2
        a, b = lo + (1 - g) * (hi - lo), lo + g * (hi - lo)
        fa, fb = f(a), f(b)
        for _ in range(iters):
            left = fa < fb
            hi = np.where(left, b, hi)
            lo = np.where(left, lo, a)
            na = lo + (1 - g) * (hi - lo)
            nb = lo + g * (hi - lo)
            a, b = na, nb
            fa, fb = f(a), f(b)
        return np.sqrt(np.minimum(np.minimum(f(lo), f(hi)), np.minimum(fa, fb)))

    def to_dict(self):
        return {"p": self.kind.p, "q": self.kind.q, "constant": self.constant,
                "model": self.model.to_dict()}


@dataclass
class BoundaryCurve:
    """Samples of ``C(s) = (x(s), y0, t(s))``, ``s`` in ``[0, 1]``, last sample included."""

    s: np.ndarray
    points: np.ndarray
    model: CuspModel

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(self.s) != len(self.points) or len(self.s) < 2:
            raise DomainError("curve needs matching s and point arrays with >= 2 samples")

    @classmethod
    def from_xt(cls, s, x, t, model: CuspModel):
        x = np.asarray(x, dtype=float)
        pts = np.stack([x, np.full_like(x, model.y0), np.asarray(t, dtype=float)], axis=1)
        return cls(np.asarray(s, dtype=float), pts, model)

    @classmethod
    def from_csv(cls, path, model: CuspModel):
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or not {"s", "x", "t"} <= set(rows[0]):
            raise DomainError("boundary CSV needs columns s, x, t")
        s = [float(r["s"]) for r in rows]
        return cls.from_xt(s, [float(r["x"]) for r in rows], [float(r["t"]) for r in rows], model)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def t(self):
        return self.points[:, 2]

    def displacement(self):
        return self.points[-1] - self.points[0]

    def unique_points(self):
        return np.unique(self.points, axis=0)


@dataclass(frozen=True)
class TrappingSlab:
    c_min: float
    c_max: float
    p: int
    q: int
    tau: float
    h: float

    def __post_init__(self):
        if self.c_min > self.c_max:
            raise DomainError("slab needs c_min <= c_max")

    @property
    def width(self):
        return self.c_max - self.c_min

    @property
    def coefficients(self):
        """Coefficients of ``t`` and ``x`` in the slab functional."""
        return (self.p * self.tau, -self.q * self.h)

    def contains(self, other: "TrappingSlab", tol=0.0):
        return other.c_min >= self.c_min - tol and other.c_max <= self.c_max + tol

    def to_dict(self):
        return {"c_min": self.c_min, "c_max": self.c_max, "p": self.p, "q": self.q,
                "coefficients": list(self.coefficients), "width": self.width}


def classify(curve: BoundaryCurve, tol=None) -> EndType:
    m = curve.model
    tol = 1e-6 * max(m.tau, m.h) if tol is None else tol
    dx, dy, dt = curve.displacement()
    p, q = round(dx / m.tau), round(dt / m.h)
    res = max(abs(dx - p * m.tau), abs(dt - q * m.h), abs(dy))
    if res > tol:
        raise DomainError(f"not a deck-periodic curve (closure residual {res:.3g})")
    return EndType(p, q)


def diameter_G(curve: BoundaryCurve) -> float:
    t = curve.unique_points()[:, 2]
    return float(t.max() - t.min())


def k0_of(G: float, h: float) -> int:
    """Smallest ``k >= 0`` with ``k h >= G``."""
    if h <= 0:
        raise DomainError("h must be positive")
    if G <= 0:
        return 0
    k = max(int(math.ceil(G / h)), 0)
    while k > 0 and (k - 1) * h >= G:
        k -= 1
    while k * h < G:
        k += 1
    return k


def slab_of_points(points, kind: EndType, model: CuspModel) -> TrappingSlab:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    s = kind.functional(model, pts[:, 0], pts[:, 2])
    return TrappingSlab(float(s.min()), float(s.max()), kind.p, kind.q, model.tau, model.h)


def slab_of_curve(curve: BoundaryCurve, kind: EndType) -> TrappingSlab:
    if classify(curve) != kind:
        raise DomainError(f"curve is of type {classify(curve)}, not {kind}")
    return slab_of_points(curve.unique_points(), kind, curve.model)


def standard_end_mesh(end: StandardEnd, y_range=None, resolution=(16, 12), x_start=0.0) -> TriMesh:
    """One fundamental piece of the standard end, geometric spacing in ``y``."""
    m = end.model
    y_lo, y_hi = y_range if y_range is not None else (m.y0, 16.0 * m.y0)
    if y_lo < m.y0 or y_hi <= y_lo:
        raise DomainError("y range must lie in [y0, inf) and be non-empty")
    ns, ny = int(resolution[0]), int(resolution[1])
    if ns < 2 or ny < 2:
        raise DomainError("resolution must be at least 2 x 2")
    p, q = end.kind.p, end.kind.q
    ys = np.geomspace(y_lo, y_hi, ny)
    if p != 0:
        xs = x_start + np.linspace(0.0, abs(p) * m.tau, ns)
        if q == 0:
            ts = np.full(ns, float(end.constant))
        else:
            ts = (end.c0 + q * m.h * xs) / (p * m.tau)
    else:
        xs = np.full(ns, float(end.constant))
        ts = np.linspace(0.0, abs(q) * m.h, ns)
    X = np.repeat(xs[:, None], ny, 1)
    T = np.repeat(ts[:, None], ny, 1)
    Y = np.repeat(ys[None, :], ns, 0)
    verts = np.stack([X, Y, T], -1).reshape(-1, 3)
    bottom = np.arange(ns) * ny
    return TriMesh(verts, grid_faces(ns, ny), {"cut": bottom})


def asymptotic_distance_profile(mesh: TriMesh, end: StandardEnd, y_ladder, band=0.05):
    """``[(y, sup distance)]`` over vertices with ``|log(y_v / y)| <= band``."""
    y = mesh.vertices[:, 1]
    out = []
    for level in y_ladder:
        sel = np.abs(np.log(y / level)) <= band
        if not np.any(sel):
            log.warning("no vertices near y=%g; skipped", level)
            continue
        out.append((float(level), float(end.distance(mesh.vertices[sel]).max())))
    return out
