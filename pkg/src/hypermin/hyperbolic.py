"""Half-plane / half-space models of H^2, H^2 x R and H^3.

Everything lives in the chart ``(x, y, t)`` with ``y > 0``.  The product
metric is ``(dx^2 + dy^2) / y^2 + dt^2`` and the hyperbolic one is
``(dx^2 + dy^2 + dt^2) / y^2``.  Point arrays are ``(..., 3)`` float arrays;
planar helpers accept ``(..., 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .exceptions import DomainError


class AmbientKind(str, Enum):
    PRODUCT = "product"
    HYPERBOLIC = "hyperbolic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown ambient kind {value!r}") from None


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.t)):
            raise DomainError("Point3 coordinates must be finite")
        if self.y <= 0:
            raise DomainError(f"Point3 requires y > 0, got y={self.y}")

    def as_array(self):
        return np.array([self.x, self.y, self.t], dtype=float)

    def to_dict(self):
        return {"x": self.x, "y": self.y, "t": self.t}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["x"]), float(d["y"]), float(d.get("t", 0.0)))


@dataclass(frozen=True)
class CuspModel:
    """Cusp end ``{y >= y0} / [psi, T(h)]`` with ``psi(x, y) = (x + tau, y)``."""

    tau: float
    h: float
    y0: float = 1.0
    ambient: AmbientKind = AmbientKind.PRODUCT

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError("tau must be positive")
        if not self.h > 0:
            raise DomainError("h must be positive")
        if not self.y0 >= 1:
            raise DomainError("y0 must be >= 1")
        object.__setattr__(self, "ambient", AmbientKind.parse(self.ambient))

    def deck(self, p: int, q: int) -> "Isometry":
        """The deck transformation ``psi^p o T(h)^q``."""
        return Isometry((Parabolic(p * self.tau), VerticalTranslate(q * self.h)))

    def to_dict(self):
        return {"tau": self.tau, "h": self.h, "y0": self.y0, "ambient": self.ambient.value}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["tau"]), float(d["h"]), float(d.get("y0", 1.0)),
                   AmbientKind.parse(d.get("ambient", "product")))


# --------------------------------------------------------------------------
# distances and metric


def _planar(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] not in (2, 3):
        raise DomainError("points must have 2 or 3 coordinates")
    if np.any(p[..., 1] <= 0):
        raise DomainError("hyperbolic points need y > 0")
    return p


def dist_h2(p, q):
    """Hyperbolic distance between the (x, y) projections of ``p`` and ``q``."""
    p, q = _planar(p), _planar(q)
    dx = p[..., 0] - q[..., 0]
    dy = p[..., 1] - q[..., 1]
    # 2 asinh(|p - q| / (2 sqrt(y1 y2))) is stable near the diagonal
    return 2.0 * np.arcsinh(np.hypot(dx, dy) / (2.0 * np.sqrt(p[..., 1] * q[..., 1])))


def dist_product(p, q):
    """Distance in H^2 x R."""
    p, q = _planar(p), _planar(q)
    return np.hypot(dist_h2(p, q), p[..., 2] - q[..., 2])


def dist_h3(p, q):
    """Distance in the upper half-space model of H^3."""
    p, q = _planar(p), _planar(q)
    chord = np.linalg.norm(p - q, axis=-1)
    return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(p[..., 1] * q[..., 1])))


def ambient_distance(p, q, ambient=AmbientKind.PRODUCT):
    if AmbientKind.parse(ambient) is AmbientKind.PRODUCT:
        return dist_product(p, q)
    return dist_h3(p, q)


def metric_diag(points, ambient=AmbientKind.PRODUCT):
    """Diagonal of the metric tensor at ``points`` (shape ``(..., 3)``)."""
    points = np.asarray(points, dtype=float)
    inv_y2 = 1.0 / points[..., 1] ** 2
    out = np.empty(points.shape, dtype=float)
    out[..., 0] = inv_y2
    out[..., 1] = inv_y2
    if AmbientKind.parse(ambient) is AmbientKind.PRODUCT:
        out[..., 2] = 1.0
    else:
        out[..., 2] = inv_y2
    return out


def segment_length(p, q, ambient=AmbientKind.PRODUCT):
    """Metric length of the chart segment ``pq``, metric frozen at the midpoint."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    g = metric_diag(0.5 * (p + q), ambient)
    d = q - p
    return np.sqrt(np.sum(g * d * d, axis=-1))


# --------------------------------------------------------------------------
# geodesics of H^2


@dataclass(frozen=True)
class VerticalLine:
    x: float

    def reflect_xy(self, xy):
        xy = np.array(xy, dtype=float, copy=True)
        xy[..., 0] = 2.0 * self.x - xy[..., 0]
        return xy

    def residual(self, xy):
        xy = np.asarray(xy, dtype=float)
        return np.abs(xy[..., 0] - self.x)

    def ideal_endpoints(self):
        return (self.x, math.inf)

    def point_at(self, s):
        """Unit-speed parametrization; ``s = 0`` at height 1."""
        s = np.asarray(s, dtype=float)
        return np.stack([np.full_like(s, self.x), np.exp(s)], axis=-1)


@dataclass(frozen=True)
class Semicircle:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError("semicircle geodesic needs a < b")

    @property
    def center(self):
        return 0.5 * (self.a + self.b)

    @property
    def radius(self):
        return 0.5 * (self.b - self.a)

    def reflect_xy(self, xy):
        xy = np.asarray(xy, dtype=float)
        m, r = self.center, self.radius
        d = xy - np.array([m, 0.0])
        s = r * r / np.sum(d * d, axis=-1)
        return np.array([m, 0.0]) + d * s[..., None]

    def residual(self, xy):
        xy = np.asarray(xy, dtype=float)
        return np.abs(np.hypot(xy[..., 0] - self.center, xy[..., 1]) - self.radius)

    def ideal_endpoints(self):
        return (self.a, self.b)

    def point_at(self, s):
        """Unit-speed parametrization from ``a`` toward ``b``; ``s = 0`` at the top."""
        s = np.asarray(s, dtype=float)
        # cos(angle) = tanh(s), sin(angle) = sech(s)
        return np.stack([self.center + self.radius * np.tanh(s),
                         self.radius / np.cosh(s)], axis=-1)


Geodesic = Union[VerticalLine, Semicircle]


def geodesic_through(p, q) -> Geodesic:
    """The complete geodesic through two distinct points of H^2."""
    (x1, y1), (x2, y2) = np.asarray(p, float)[:2], np.asarray(q, float)[:2]
    if y1 <= 0 or y2 <= 0:
        raise DomainError("points must lie in the upper half-plane")
    if abs(x1 - x2) < 1e-14 * max(1.0, abs(x1)):
        return VerticalLine(0.5 * (x1 + x2))
    # center on the real axis equidistant from p and q
    m = (x2 ** 2 + y2 ** 2 - x1 ** 2 - y1 ** 2) / (2.0 * (x2 - x1))
    r = math.hypot(x1 - m, y1)
    return Semicircle(m - r, m + r)


def geodesic_from_ideal(a, b) -> Geodesic:
    """Geodesic with ideal endpoints ``a`` and ``b`` (either may be ``inf``)."""
    if math.isinf(a):
        return VerticalLine(b)
    if math.isinf(b):
        return VerticalLine(a)
    return Semicircle(min(a, b), max(a, b))


# --------------------------------------------------------------------------
# Moebius action on the upper half-plane


def _mobius(mat, z, conj=False):
    (a, b), (c, d) = mat
    if conj:
        z = np.conj(z)
    den = c * z + d
    return (a * z + b) / den


def _xy_to_c(xy):
    xy = np.asarray(xy, dtype=float)
    return xy[..., 0] + 1j * xy[..., 1]


def _c_to_xy(z):
    return np.stack([z.real, z.imag], axis=-1)


def _matmul(m1, m2):
    return tuple(map(tuple, np.asarray(m1, float) @ np.asarray(m2, float)))


def _matinv(m):
    (a, b), (c, d) = m
    return ((d, -b), (-c, a))


class _PlanarGenerator:
    """Generators acting by a Moebius map on (x, y) and an affine map on t."""

    def _planar(self, xy):
        raise NotImplementedError

    def _t(self, t):
        return t

    def apply(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.array(pts, copy=True)
        out[..., :2] = self._planar(pts[..., :2])
        if pts.shape[-1] == 3:
            out[..., 2] = self._t(pts[..., 2])
        return out


@dataclass(frozen=True)
class Parabolic(_PlanarGenerator):
    """``psi(x, y, t) = (x + tau, y, t)``."""

    tau: float

    def _planar(self, xy):
        out = np.array(xy, copy=True)
        out[..., 0] += self.tau
        return out

    def inverse(self):
        return Parabolic(-self.tau)


@dataclass(frozen=True)
class VerticalTranslate(_PlanarGenerator):
    """``T(h)(x, y, t) = (x, y, t + h)``."""

    h: float

    def _planar(self, xy):
        return np.array(xy, copy=True)

    def _t(self, t):
        return t + self.h

    def inverse(self):
        return VerticalTranslate(-self.h)


@dataclass(frozen=True)
class HeightReflection(_PlanarGenerator):
    """``t -> 2c - t``; combined with a geodesic reflection it is the half-turn
    about the horizontal geodesic at height ``c``."""

    c: float

    def _planar(self, xy):
        return np.array(xy, copy=True)

    def _t(self, t):
        return 2.0 * self.c - t

    def inverse(self):
        return self


@dataclass(frozen=True)
class GeodesicReflection(_PlanarGenerator):
    geodesic: Geodesic

    def _planar(self, xy):
        return self.geodesic.reflect_xy(xy)

    def inverse(self):
        return self


@dataclass(frozen=True)
class HyperbolicTranslate(_PlanarGenerator):
    """Translation by ``length`` along ``axis`` (toward ``b``, or upward)."""

    axis: Geodesic
    length: float

    def _matrix(self):
        e = math.exp(0.5 * self.length)
        dil = ((e, 0.0), (0.0, 1.0 / e))
        if isinstance(self.axis, VerticalLine):
            m = ((1.0, -self.axis.x), (0.0, 1.0))
        else:
            a, b = self.axis.a, self.axis.b
            m = ((1.0, -a), (-1.0, b))
        return _matmul(_matinv(m), _matmul(dil, m))

    def _planar(self, xy):
        return _c_to_xy(_mobius(self._matrix(), _xy_to_c(xy)))

    def inverse(self):
        return HyperbolicTranslate(self.axis, -self.length)


@dataclass(frozen=True)
class HalfTurn(_PlanarGenerator):
    """Rotation by pi of H^2 about ``center``; in H^2 x R it is the half-turn
    about the vertical line through ``center``."""

    center: tuple

    def _matrix(self):
        px, py = self.center
        n = ((1.0, -px), (0.0, py))
        s = ((0.0, -1.0), (1.0, 0.0))
        return _matmul(_matinv(n), _matmul(s, n))

    def _planar(self, xy):
        return _c_to_xy(_mobius(self._matrix(), _xy_to_c(xy)))

    def inverse(self):
        return self


@dataclass(frozen=True)
class MobiusMap(_PlanarGenerator):
    """Orientation-preserving isometry of H^2 given by a real 2x2 matrix."""

    matrix: tuple

    def _planar(self, xy):
        return _c_to_xy(_mobius(self.matrix, _xy_to_c(xy)))

    def inverse(self):
        return MobiusMap(_matinv(self.matrix))


@dataclass(frozen=True)
class ModelMap:
    """Chart change between the unit disk and the half-plane (not an isometry of
    one model; included so that boundary data given in the disk can be composed
    with isometries on ingestion)."""

    to_halfplane: bool = True

    def apply(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.array(pts, copy=True)
        f = disk_to_halfplane if self.to_halfplane else halfplane_to_disk
        out[..., :2] = f(pts[..., :2])
        return out

    def inverse(self):
        return ModelMap(not self.to_halfplane)


@dataclass(frozen=True)
class Isometry:
    """Composition of generators; ``steps[0]`` is applied first."""

    steps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def apply(self, pts):
        out = np.asarray(pts, dtype=float)
        for g in self.steps:
            out = g.apply(out)
        return out

    def __call__(self, pts):
        return self.apply(pts)

    def __matmul__(self, other):
        """``(f @ g)(p) = f(g(p))``."""
        return Isometry(tuple(other.steps) + tuple(self.steps))

    def inverse(self):
        return Isometry(tuple(g.inverse() for g in reversed(self.steps)))

    @classmethod
    def identity(cls):
        return cls(())


def apply(iso, p):
    """Apply an isometry (or a single generator) to a Point3 or a point array."""
    if isinstance(p, Point3):
        x, y, t = iso.apply(p.as_array())
        return Point3(float(x), float(y), float(t))
    return iso.apply(p)


def reflection_at_height(geodesic: Geodesic, c: float) -> Isometry:
    """Half-turn of H^2 x R about the horizontal geodesic ``geodesic x {c}``."""
    return Isometry((GeodesicReflection(geodesic), HeightReflection(c)))


# --------------------------------------------------------------------------
# disk <-> half-plane


def disk_to_halfplane(xy):
    """Cayley-type map sending the disk origin to (0, 1) and disk point (0, 1)
    to the ideal point at infinity: ``w = i (1 - i z) / (1 + i z)``."""
    z = _xy_to_c(xy)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("disk points must satisfy |p| < 1")
    return _c_to_xy(1j * (1 - 1j * z) / (1 + 1j * z))


def disk_boundary_to_halfplane(theta):
    """Ideal point ``e^{i theta}`` of the disk as an x-coordinate (``inf`` for i)."""
    z = np.exp(1j * np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1j * (1 - 1j * z) / (1 + 1j * z)
    x = np.where(np.abs(1 + 1j * z) < 1e-12, np.inf, w.real)
    return x


def halfplane_to_disk(xy):
    w = _xy_to_c(xy)
    if np.any(w.imag <= 0):
        raise DomainError("half-plane points must satisfy y > 0")
    return _c_to_xy((1j - w) / (1j * w - 1))


# --------------------------------------------------------------------------
# cusp quantities


def level_torus_mean_curvature(model: CuspModel) -> float:
    """Mean curvature of the level tori ``{y = const}`` (magnitude).

    Orientation: normal toward increasing ``y`` (toward the cusp).
    """
    if model.ambient is AmbientKind.PRODUCT:
        # horocycle x S^1: principal curvatures 1 (horocycle) and 0
        return 0.5
    return 1.0


def horocycle_length(model: CuspModel, y: float) -> float:
    """Length of ``c(y) = {y = const} / [psi]`` in the half-plane metric."""
    if y < model.y0:
        raise DomainError(f"y={y} lies below the truncation level y0={model.y0}")
    return model.tau / y


def level_set_mean_curvature(ambient, y: float, eps: float = 1e-5) -> float:
    """Mean curvature of ``{y = const}`` from ``H = -div(N) / 2`` with ``N = n d/dy``.

    The divergence is taken by a central difference of ``sqrt(g) N^y``; this is
    independent of the tabulated constants in :func:`level_torus_mean_curvature`.
    """
    ambient = AmbientKind.parse(ambient)
    dim_h = 2 if ambient is AmbientKind.PRODUCT else 3

    def flux(s):
        sqrt_g = s ** (-dim_h)
        return sqrt_g * s  # unit normal component N^y = y in both metrics

    div = (flux(y + eps) - flux(y - eps)) / (2 * eps) / y ** (-dim_h)
    return -0.5 * div


def as_points(p: Sequence) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(p, dtype=float))
    if arr.shape[-1] != 3:
        raise DomainError("expected points with three coordinates (x, y, t)")
    return arr
