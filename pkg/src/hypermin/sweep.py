"""Barrier sweeps: move a family of minimal surfaces toward a mesh and record
where it first comes within a contact tolerance.

A sweep only certifies what it sees.  It checks a truncated mesh against
finitely many members of a family, so a Clear result is evidence for a
trapping slab, never a proof of one; everything above the truncation height
is outside its reach.

Parameters of the families:

``arch``
    ``S^lam_T`` translated in ``w = t - lam x``.  The parameter is the
    position of the limit plane ``w = P`` of the leg that faces the mesh;
    ``side = +1`` puts the arch above the mesh (parameter decreasing),
    ``side = -1`` below it.  ``lam = 0`` is the horizontal family ``S^0_T``.
``vertical``
    Planes ``{x = P} x R`` (vertical geodesic times ``R``).
``hemisphere``
    Totally geodesic hemispheres of ``H^3`` over circles tangent to a line
    ``L`` of ``{y = 0}``, parameter the radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .barrier import rising_branch_v
from .ends import BoundaryCurve, EndType, TrappingSlab, classify, slab_of_points
from .exceptions import DomainError, NumericalError
from .hyperbolic import CuspModel, dist_h3, dist_product
from .mesh import TriMesh

BISECTION_DEPTH = 40
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# --------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class SweepFamily:
    kind: str
    schedule: tuple
    lam: float = 0.0
    T: float = math.inf
    side: int = 1
    line: tuple = ()   # hemisphere: (nx, nt, d) with the mesh in nx x + nt t < d
    anchor: tuple = ()  # hemisphere: tangency point (x, t) on the line

    def __post_init__(self):
        if self.kind not in ("arch", "vertical", "hemisphere"):
            raise DomainError(f"unknown sweep family {self.kind!r}")
        s = np.asarray(self.schedule, dtype=float)
        if s.ndim != 1 or len(s) < 2:
            raise DomainError("a schedule needs at least two parameters")
        d = np.diff(s)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise DomainError("schedule must be strictly monotone")
        object.__setattr__(self, "schedule", tuple(float(v) for v in s))
        if self.side not in (1, -1):
            raise DomainError("side must be +1 or -1")
        if self.kind == "arch":
            if not (self.T > 1 and math.isfinite(self.T)):
                raise DomainError("arch families need a finite T > 1")
            if self.side * (s[-1] - s[0]) > 0:
                raise DomainError("arch schedule must move toward the mesh")
        if self.kind == "vertical" and self.side * (s[-1] - s[0]) > 0:
            raise DomainError("plane schedule must move toward the mesh")
        if self.kind == "hemisphere":
            if len(self.line) != 3 or len(self.anchor) != 2:
                raise DomainError("hemisphere families need a line and an anchor")
            if s[0] <= 0 or s[-1] < s[0]:
                raise DomainError("hemisphere radii must be positive and growing")

    @classmethod
    def horizontal(cls, T, schedule, side=1):
        return cls("arch", tuple(schedule), 0.0, float(T), side)

    @classmethod
    def tilted(cls, lam, T, schedule, side=1):
        return cls("arch", tuple(schedule), float(lam), float(T), side)

    @classmethod
    def vertical_planes(cls, schedule, side=1):
        return cls("vertical", tuple(schedule), side=side)

    @classmethod
    def hemispheres(cls, line, anchor, radii):
        n = np.asarray(line[:2], dtype=float)
        norm = float(np.hypot(*n))
        if norm == 0:
            raise DomainError("line normal must be non-zero")
        line = (n[0] / norm, n[1] / norm, float(line[2]) / norm)
        return cls("hemisphere", tuple(radii), line=line, anchor=tuple(map(float, anchor)))

    # -- arch profile ------------------------------------------------------

    def leg(self, y):
        """``v`` at which the facing leg reaches height ``y`` (nan above the crest)."""
        # the profile only sees lam^2; a negative slope is the mirror image x -> -x
        return rising_branch_v(abs(self.lam), self.T, y)

    @property
    def v0(self):
        # complete integral 2 E(1 - T); the quadrature route loses accuracy for huge T
        return math.pi if self.lam == 0 else 2.0 * float(special.ellipe(1.0 - self.T))

    def to_dict(self):
        d = {"kind": self.kind, "schedule": [self.schedule[0], self.schedule[-1], len(self.schedule)]}
        if self.kind == "arch":
            d.update(lam=self.lam, T=self.T, side=self.side)
        elif self.kind == "vertical":
            d.update(side=self.side)
        else:
            d.update(line=list(self.line), anchor=list(self.anchor))
        return d


def arch_T_for(lam, y_top, leg_tol):
    """Smallest power-of-two ``T`` whose arch legs stay within ``leg_tol`` of
    their limit plane up to height ``y_top``."""
    lam = abs(lam)
    if lam == 0:
        return max(2.0, y_top / math.sin(min(leg_tol, 1.0)))
    T = 2.0
    while True:
        v = float(rising_branch_v(lam, T, y_top))
        if math.isfinite(v) and v <= leg_tol:
            return T
        T *= 2.0
        if T > 1e300:
            raise NumericalError("no barrier height reaches the requested leg tolerance")


# --------------------------------------------------------------------------
# contact evaluation


@dataclass(frozen=True)
class Contact:
    param: float
    point: tuple          # mesh sample (x, y, t)
    barrier_point: tuple  # barrier sample paired with it
    separation: float
    source: tuple         # vertex ids: one id for a vertex, two for an edge midpoint

    outcome = "contact"

    def to_dict(self):
        return {"outcome": "contact", "param": self.param, "point": list(self.point),
                "barrier_point": list(self.barrier_point), "separation": self.separation,
                "source": list(self.source)}


@dataclass(frozen=True)
class Clear:
    param: float  # last scheduled parameter

    outcome = "clear"

    def to_dict(self):
        return {"outcome": "clear", "param": self.param}


ContactResult = Contact | Clear


@dataclass
class _Samples:
    pts: np.ndarray
    source: np.ndarray  # (n, 2); second id -1 for vertices

    @classmethod
    def of(cls, mesh: TriMesh):
        e = mesh.edges()
        V = mesh.vertices
        pts = np.concatenate([V, 0.5 * (V[e[:, 0]] + V[e[:, 1]])])
        src = np.concatenate([np.column_stack([np.arange(len(V)), -np.ones(len(V), int)]), e])
        return cls(pts, src)


def _golden_min(f, lo, hi, iters=60):
    """Vectorised golden-section minimisation on ``[lo, hi]``."""
    a = lo + (1 - _GOLDEN) * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(iters):
        left = fa < fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        a = lo + (1 - _GOLDEN) * (hi - lo)
        b = lo + _GOLDEN * (hi - lo)
        fa, fb = f(a), f(b)
    cand = np.stack([lo, hi, a, b])
    vals = np.stack([f(lo), f(hi), fa, fb])
    k = np.argmin(vals, axis=0)
    return np.take_along_axis(cand, k[None], 0)[0]


def _eval_arch(fam: SweepFamily, P, pts, tol):
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    leg = fam.leg(y)
    reach = np.isfinite(leg)
    w = t - fam.lam * x
    r = fam.side * (w - P)  # > leg: past the facing leg
    inside = reach & (r > leg) & (r < fam.v0 - np.where(reach, leg, 0.0))
    W = P + fam.side * np.where(reach, leg, 0.0)  # facing leg, in w, at each height
    G = w - W
    # points farther than this along t cannot be within tol of the leg
    near = reach & (np.abs(G) <= tol * (1.0 + 1.01 * abs(fam.lam) * y) + 1e-15)
    sep = np.full(len(pts), np.inf)
    feet = np.full((len(pts), 3), np.nan)
    if np.any(near):
        xs, ys, Gs = x[near], y[near], G[near]
        if fam.lam != 0:
            end = Gs / fam.lam
            lo, hi = np.minimum(0.0, end), np.maximum(0.0, end)

            def f(d):
                return (2 * np.arcsinh(np.abs(d) / (2 * ys))) ** 2 + (Gs - fam.lam * d) ** 2

            d = _golden_min(f, lo, hi)
        else:
            d = np.zeros_like(xs)
        fx = xs + d
        foot = np.column_stack([fx, ys, fam.lam * fx + W[near]])
        feet[near] = foot
        sep[near] = dist_product(pts[near], foot)
    return sep, feet, inside


def _eval_vertical(fam: SweepFamily, P, pts, tol):
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    inside = fam.side * (x - P) > 0
    sep = np.arcsinh(np.abs(x - P) / y)
    feet = np.column_stack([np.full_like(x, P), np.hypot(y, x - P), t])
    return sep, feet, inside


def _hemisphere_center(fam: SweepFamily, r):
    nx, nt, _ = fam.line
    ax, at = fam.anchor
    return ax + r * nx, at + r * nt


def _eval_hemisphere(fam: SweepFamily, r, pts, tol):
    cx, ct = _hemisphere_center(fam, r)
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    dx, dt = x - cx, t - ct
    rho2 = dx * dx + dt * dt
    q = rho2 + y * y - r * r
    inside = q < 0
    sep = np.arcsinh(np.abs(q) / (2.0 * r * y))
    # foot: in the vertical plane through the centre, send the great circle to
    # the imaginary axis by w -> (w - r) / (w + r), project, and map back
    rho = np.sqrt(rho2)
    z = rho + 1j * y
    m = (z - r) / (z + r)
    f = 1j * np.abs(m)
    back = r * (1 + f) / (1 - f)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(rho > 0, dx / rho, 1.0)
        ut = np.where(rho > 0, dt / rho, 0.0)
    feet = np.column_stack([cx + back.real * ux, back.imag, ct + back.real * ut])
    return sep, feet, inside


_EVAL = {"arch": _eval_arch, "vertical": _eval_vertical, "hemisphere": _eval_hemisphere}


def barrier_residual(family: SweepFamily, param, point):
    """How far a claimed barrier sample is from the barrier (0 when exact)."""
    x, y, t = map(float, point)
    if family.kind == "arch":
        leg = float(family.leg(y))
        return abs((t - family.lam * x) - (param + family.side * leg))
    if family.kind == "vertical":
        return abs(x - param)
    cx, ct = _hemisphere_center(family, param)
    return abs(math.sqrt((x - cx) ** 2 + (t - ct) ** 2 + y * y) - param)


def _ambient_distance(family, p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    return float(dist_h3(p, q) if family.kind == "hemisphere" else dist_product(p, q))


def verify_contact(result: Contact, family: SweepFamily, tolerance, residual_tol=1e-9):
    """Re-check a reported contact from its explicit sample pair."""
    d = _ambient_distance(family, result.point, result.barrier_point)
    scale = max(1.0, abs(result.param))
    return d <= tolerance * (1 + 1e-9) and barrier_residual(family, result.param, result.barrier_point) <= residual_tol * scale


# --------------------------------------------------------------------------
# sweeping


def _state(family, param, samples, tol):
    sep, feet, inside = _EVAL[family.kind](family, param, samples.pts, tol)
    k = int(np.argmin(sep))
    touching = bool(sep[k] <= tol) or bool(np.any(inside))
    return touching, k, float(sep[k]), feet


def sweep(mesh: TriMesh, family: SweepFamily, tolerance: float) -> ContactResult:
    """Advance ``family`` along its schedule; bisect the first bracket that
    ends in contact (distance at most ``tolerance`` or a sample already
    behind the barrier)."""
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    samples = _Samples.of(mesh)
    sched = family.schedule
    touching, _, _, _ = _state(family, sched[0], samples, tolerance)
    if touching:
        raise DomainError("invalid sweep start: the first barrier already touches the mesh")
    lo = sched[0]
    for p in sched[1:]:
        touching, _, _, _ = _state(family, p, samples, tolerance)
        if touching:
            hi = p
            break
        lo = p
    else:
        return Clear(float(sched[-1]))
    for _ in range(BISECTION_DEPTH):
        mid = 0.5 * (lo + hi)
        if _state(family, mid, samples, tolerance)[0]:
            hi = mid
        else:
            lo = mid
    _, k, sep, feet = _state(family, hi, samples, tolerance)
    if sep > tolerance:
        raise NumericalError("contact bracket closed without a sample pair within tolerance",
                             {"param": hi, "separation": sep})
    src = tuple(int(i) for i in samples.source[k] if i >= 0)
    return Contact(float(hi), tuple(map(float, samples.pts[k])), tuple(map(float, feet[k])),
                   sep, src)


# --------------------------------------------------------------------------
# trapping slabs


def boundary_curve(mesh: TriMesh, model: CuspModel, cut_tag="cut") -> BoundaryCurve:
    """The cut of an end mesh as a sampled curve (tag order)."""
    if cut_tag not in mesh.tags:
        raise DomainError(f"mesh has no {cut_tag!r} tag")
    pts = mesh.vertices[mesh.tags[cut_tag]]
    s = np.linspace(0.0, 1.0, len(pts))
    return BoundaryCurve(s, pts, model)


@dataclass
class TrappingReport:
    slab: TrappingSlab
    envelope: TrappingSlab
    lower: ContactResult
    upper: ContactResult
    family: str
    tolerance: float
    y_cut: float
    mesh_edge: float
    meta: dict = field(default_factory=dict)
    families: tuple = field(default=(), repr=False)  # (lower, upper)

    @property
    def contains_envelope(self):
        return self.slab.contains(self.envelope)

    @property
    def width_ratio(self):
        if self.envelope.width == 0:
            return math.inf if self.slab.width > 0 else 1.0
        return self.slab.width / self.envelope.width

    def to_dict(self):
        return {"slab": self.slab.to_dict(), "envelope": self.envelope.to_dict(),
                "lower": self.lower.to_dict(), "upper": self.upper.to_dict(),
                "family": self.family, "tolerance": self.tolerance,
                "y_cut": self.y_cut, "mesh_edge": self.mesh_edge,
                "contains_envelope": self.contains_envelope, **self.meta}


def _linear_schedule(start, stop, n):
    return tuple(np.linspace(start, stop, n))


def trapping_report(mesh: TriMesh, kind: EndType, model: CuspModel, tolerance=None,
                    cut_tag="cut", n_steps=200, T=None, rel_tol=1e-3) -> TrappingReport:
    """Sweep the type-appropriate family from both sides of an end mesh.

    The default contact tolerance is ``rel_tol * h``, lowered to a hundredth of
    the envelope's width (in ``t`` or ``x`` units) when that is smaller.
    Schedules start ten envelope widths outside the boundary envelope (with a
    floor of a hundred tolerances when the envelope is degenerate).  Arch
    heights default to the smallest ``T`` whose legs stay within a tenth of
    the tolerance of their limit plane up to the top of the mesh; the slab
    edges are the stalled limit planes.
    """
    curve = boundary_curve(mesh, model, cut_tag)
    found = classify(curve)
    # (p, q) and (-p, -q) name the same end traversed the other way
    if found not in (kind, EndType(-kind.p, -kind.q)):
        raise DomainError(f"boundary of the mesh is of type ({found.p},{found.q}), not ({kind.p},{kind.q})")
    env = slab_of_points(curve.unique_points(), kind, model)
    p, q = kind.p, kind.q
    if tolerance is None:
        # a contact tolerance comparable to a thin envelope would swamp it
        own = env.width / abs(p * model.tau if p else q * model.h)
        cap = rel_tol * model.h
        # rounding leaves exact ends with envelopes of width ~1e-16: treat as flat
        tol = cap if own <= 1e-9 * model.h else min(cap, 1e-2 * own)
    else:
        tol = float(tolerance)
    y_top = float(mesh.vertices[:, 1].max())
    meta = {}
    if p != 0:
        lam = 0.0 if q == 0 else kind.slope(model)
        scale = p * model.tau  # s = scale * w
        w_lo, w_hi = sorted((env.c_min / scale, env.c_max / scale))
        pad = 10.0 * max(w_hi - w_lo, 100.0 * tol)
        T = arch_T_for(lam, y_top, 0.1 * tol) if T is None else float(T)
        up = SweepFamily("arch", _linear_schedule(w_hi + pad, w_lo - pad, n_steps), lam, T, 1)
        dn = SweepFamily("arch", _linear_schedule(w_lo - pad, w_hi + pad, n_steps), lam, T, -1)
        meta.update(lam=lam, T=T)
        to_s = lambda w: scale * w  # noqa: E731
        name = "horizontal" if q == 0 else "tilted"
    else:
        scale = -q * model.h  # s = scale * x
        x_lo, x_hi = sorted((env.c_min / scale, env.c_max / scale))
        pad = 10.0 * max(x_hi - x_lo, 100.0 * tol)
        up = SweepFamily("vertical", _linear_schedule(x_hi + pad, x_lo - pad, n_steps), side=1)
        dn = SweepFamily("vertical", _linear_schedule(x_lo - pad, x_hi + pad, n_steps), side=-1)
        to_s = lambda x: scale * x  # noqa: E731
        name = "vertical"
    upper, lower = sweep(mesh, up, tol), sweep(mesh, dn, tol)
    if isinstance(upper, Clear) or isinstance(lower, Clear):
        raise NumericalError("a sweep crossed the whole envelope without contact",
                             {"upper": upper.to_dict(), "lower": lower.to_dict()})
    a, b = sorted((to_s(lower.param), to_s(upper.param)))
    slab = TrappingSlab(a, b, p, q, model.tau, model.h)
    return TrappingReport(slab, env, lower, upper, name, tol, y_top,
                          mesh.max_edge_length(), meta, (dn, up))


def barrier_surface(family: SweepFamily, param, near: TriMesh, n=(24, 24)) -> TriMesh:
    """A sampled piece of the family member at ``param`` over the extent of
    ``near`` (for inspection; contacts never use it)."""
    from .mesh import grid_faces

    V = near.vertices
    nu, nv = int(n[0]), int(n[1])
    lo, hi = V.min(axis=0), V.max(axis=0)
    if family.kind == "arch":
        # the facing leg only, up to the mesh top or the crest
        ys = np.geomspace(lo[1], hi[1], nv)
        ys = ys[np.isfinite(family.leg(ys))]
        if len(ys) < 2:
            raise DomainError("the arch crest lies below the mesh")
        nv = len(ys)
        U, Y = np.meshgrid(np.linspace(lo[0], hi[0], nu), ys, indexing="ij")
        T = family.lam * U + param + family.side * family.leg(Y)
        P = np.stack([U, Y, T], -1)
    elif family.kind == "vertical":
        Y, T = np.meshgrid(np.geomspace(lo[1], hi[1], nu), np.linspace(lo[2], hi[2], nv), indexing="ij")
        P = np.stack([np.full_like(Y, param), Y, T], -1)
    else:
        cx, ct = _hemisphere_center(family, param)
        # radial x angular grid; the pole row is kept off the axis to avoid degenerate faces
        R, A = np.meshgrid(param * np.linspace(1e-3, 1.0 - 1e-9, nu), np.linspace(0, 2 * math.pi, nv),
                           indexing="ij")
        P = np.stack([cx + R * np.cos(A), np.sqrt(param * param - R * R), ct + R * np.sin(A)], -1)
    return TriMesh(P.reshape(-1, 3), grid_faces(nu, nv))


def empirical_trapping_slab(mesh: TriMesh, kind: EndType, model: CuspModel, **kw) -> TrappingSlab:
    return trapping_report(mesh, kind, model, **kw).slab


def hemisphere_sweep(mesh: TriMesh, line, anchor=None, radii=None, tolerance=1e-3,
                     n_steps=200) -> ContactResult:
    """Grow hemispheres tangent to ``L = {nx x + nt t = d}`` from the side
    away from the mesh boundary; ``mesh`` lives in the half-space chart of
    ``H^3`` (``y`` is the height).

    The normal is oriented so the boundary lies in ``nx x + nt t < d``.
    """
    n = np.asarray(line[:2], dtype=float)
    norm = float(np.hypot(*n))
    if norm == 0:
        raise DomainError("line normal must be non-zero")
    n, d = n / norm, float(line[2]) / norm
    V = mesh.vertices
    bnd = V[mesh.boundary_vertices()] if len(mesh.boundary_vertices()) else V
    sb = bnd[:, 0] * n[0] + bnd[:, 2] * n[1] - d
    if np.any(np.abs(sb) <= 1e-12) or (np.any(sb > 0) and np.any(sb < 0)):
        raise DomainError("mesh boundary straddles the line")
    if np.all(sb > 0):
        n, d = -n, -d
    if anchor is None:
        c = V[:, [0, 2]].mean(axis=0)
        anchor = c - (c @ n - d) * n
    anchor = np.asarray(anchor, dtype=float)
    if abs(anchor @ n - d) > 1e-9 * max(1.0, abs(d)):
        raise DomainError("anchor must lie on the line")
    if radii is None:
        extent = float(np.ptp(V, axis=0).max() + np.abs(V).max() + 1.0)
        radii = np.geomspace(1e-3 * tolerance, 1e6 * extent, n_steps)
    fam = SweepFamily.hemispheres((n[0], n[1], d), tuple(anchor), tuple(radii))
    return sweep(mesh, fam, tolerance)


__all__ = ["SweepFamily", "Contact", "Clear", "ContactResult", "sweep", "verify_contact",
           "barrier_residual", "boundary_curve", "TrappingReport", "trapping_report",
           "empirical_trapping_slab", "hemisphere_sweep", "barrier_surface", "arch_T_for", "BISECTION_DEPTH"]
