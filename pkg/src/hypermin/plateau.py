"""Plateau disks spanning closed polygons in the ``(x, y, t)`` chart.

Face areas use the ambient metric frozen at the face centroid.  With
``S = diag(1/y_c, 1/y_c, s_t)`` (``s_t = 1`` for the product metric,
``1/y_c`` for ``H^3``) a face spanned by ``e1, e2`` has area
``|S e1 x S e2| / 2``.  The gradient below is exact for that discrete energy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import spsolve
from sklearn.base import BaseEstimator

from .exceptions import DomainError, NumericalError
from .hyperbolic import AmbientKind, disk_to_halfplane, dist_h2, geodesic_through, halfplane_to_disk
from .mesh import TriMesh

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# polygons


@dataclass
class Polygon:
    """Closed polygon; edge ``k`` runs from ``vertices[k]`` to ``vertices[k+1]``.

    Edge kinds: ``"vertical"`` (same ``(x, y)``), ``"geodesic"`` (horizontal
    geodesic at constant ``t``) and ``"helix"`` (horocycle ``y = const`` with
    ``t`` affine in ``x``, the cut of a standard end).
    """

    vertices: np.ndarray
    kinds: list = None
    names: list = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        k = len(self.vertices)
        if k < 3:
            raise DomainError("polygon needs at least three vertices")
        if self.kinds is None:
            self.kinds = [self._infer(a, b) for a, b in self._pairs()]
        if len(self.kinds) != k:
            raise DomainError("one kind per edge is required")
        if self.names is None:
            self.names = [f"e{i}" for i in range(k)]
        for (a, b), kind in zip(self._pairs(), self.kinds):
            self._check(a, b, kind)

    def _pairs(self):
        V = self.vertices
        return list(zip(V, np.roll(V, -1, axis=0)))

    @staticmethod
    def _infer(a, b):
        if np.allclose(a[:2], b[:2], rtol=0, atol=1e-12):
            return "vertical"
        if abs(a[2] - b[2]) <= 1e-12:
            return "geodesic"
        if abs(a[1] - b[1]) <= 1e-12:
            return "helix"
        raise DomainError("edge is neither vertical, horizontal geodesic nor helix")

    @staticmethod
    def _check(a, b, kind):
        if np.any(np.array([a[1], b[1]]) <= 0):
            raise DomainError("polygon leaves the model (y <= 0)")
        if np.allclose(a, b):
            raise DomainError("zero-length polygon edge")
        if kind == "vertical" and not np.allclose(a[:2], b[:2], rtol=0, atol=1e-12):
            raise DomainError("vertical edge endpoints differ in (x, y)")
        if kind == "geodesic" and abs(a[2] - b[2]) > 1e-12:
            raise DomainError("geodesic edge must be horizontal")
        if kind == "helix" and abs(a[1] - b[1]) > 1e-12:
            raise DomainError("helix edge must stay on one horocycle")
        if kind not in ("vertical", "geodesic", "helix"):
            raise DomainError(f"unknown edge kind {kind!r}")

    def edge_length(self, k):
        a, b = self._pairs()[k]
        kind = self.kinds[k]
        if kind == "vertical":
            return abs(b[2] - a[2])
        if kind == "geodesic":
            return float(dist_h2(a, b))
        return math.hypot((b[0] - a[0]) / a[1], b[2] - a[2])

    def edge_points(self, k, n):
        """``n + 1`` points on edge ``k`` (both ends), equally spaced in length."""
        a, b = self._pairs()[k]
        s = np.linspace(0.0, 1.0, n + 1)
        kind = self.kinds[k]
        if kind == "vertical":
            out = np.repeat(a[None], n + 1, 0)
            out[:, 2] = a[2] + s * (b[2] - a[2])
        elif kind == "geodesic":
            g = geodesic_through(a[:2], b[:2])
            s0, s1 = _geodesic_param(g, a[:2]), _geodesic_param(g, b[:2])
            xy = g.point_at(s0 + s * (s1 - s0))
            out = np.column_stack([xy, np.full(n + 1, a[2])])
        else:
            out = a[None] + s[:, None] * (b - a)[None]
        out[0], out[-1] = a, b
        return out

    def sample(self, target):
        """Boundary loop ``(P, edge_id)``; ``target`` is the ambient spacing."""
        pts, ids = [], []
        for k in range(len(self.vertices)):
            n = max(2, int(math.ceil(self.edge_length(k) / target)))
            P = self.edge_points(k, n)[:-1]
            pts.append(P)
            ids.append(np.full(len(P), k))
        return np.concatenate(pts), np.concatenate(ids)


def _geodesic_param(g, xy):
    from .hyperbolic import VerticalLine

    if isinstance(g, VerticalLine):
        return math.log(xy[1])
    c, r = g.center, g.radius
    return math.atanh(np.clip((xy[0] - c) / r, -1 + 1e-16, 1 - 1e-16))


# --------------------------------------------------------------------------
# initial disks


def concentric_disk(n_boundary, n_rings=None):
    """Triangulated unit disk with ``n_boundary`` boundary points at angles
    ``2 pi j / n``.  Ring sizes are even, so the mesh is invariant under the
    rotation by ``pi`` when ``n_boundary`` is even."""
    if n_boundary < 6:
        raise DomainError("need at least six boundary points")
    K = n_rings or max(1, int(round(n_boundary / (2 * math.pi))))
    rings = [np.array([0])]
    pts = [np.zeros((1, 2))]
    nxt = 1
    sizes = []
    for k in range(1, K + 1):
        m = n_boundary if k == K else max(6, 2 * int(round(n_boundary * k / K / 2)))
        ang = 2 * math.pi * np.arange(m) / m
        pts.append((k / K) * np.column_stack([np.cos(ang), np.sin(ang)]))
        rings.append(np.arange(nxt, nxt + m))
        nxt += m
        sizes.append(m)
    faces = []
    c = rings[1]
    faces += [[0, c[j], c[(j + 1) % len(c)]] for j in range(len(c))]
    for k in range(1, K):
        inner, outer = rings[k], rings[k + 1]
        ni, no = len(inner), len(outer)
        i = j = 0
        # merge by angle; ties broken toward the outer ring on both halves alike
        while i < ni or j < no:
            ai = 2 * math.pi * (i + 1) / ni
            ao = 2 * math.pi * (j + 1) / no
            if j < no and (i >= ni or ao <= ai + 1e-12):
                faces.append([inner[i % ni], outer[j % no], outer[(j + 1) % no]])
                j += 1
            else:
                faces.append([inner[i % ni], outer[j % no], inner[(i + 1) % ni]])
                i += 1
    return np.concatenate(pts), np.array(faces, dtype=np.int64), rings[-1]


def _cot_laplacian(P, F):
    n = len(P)
    I, J, W = [], [], []
    for k in range(3):
        i, j, o = F[:, (k + 1) % 3], F[:, (k + 2) % 3], F[:, k]
        u, v = P[i] - P[o], P[j] - P[o]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        cot = np.sum(u * v, axis=1) / cross
        I += [i, j]
        J += [j, i]
        W += [0.5 * cot, 0.5 * cot]
    I, J, W = np.concatenate(I), np.concatenate(J), np.concatenate(W)
    L = sp.coo_matrix((W, (I, J)), shape=(n, n)).tocsr()
    return sp.diags(np.asarray(L.sum(axis=1)).ravel()) - L


def harmonic_disk(boundary, n_rings=None):
    """Disk mesh spanning a boundary loop.

    The loop is moved so that its mean point sits at ``i``, sent to the
    Poincare disk, and extended harmonically in ``(disk x, disk y, t)``.
    Extending in half-plane coordinates instead lets the interior sag toward
    ``y = 0`` when the loop has corners at very different heights.
    """
    boundary = np.asarray(boundary, dtype=float)
    P2, F, ring = concentric_disk(len(boundary), n_rings)
    L = _cot_laplacian(P2, F)
    n = len(P2)
    free = np.setdiff1d(np.arange(n), ring)
    x0 = float(boundary[:, 0].mean())
    y0 = float(np.exp(np.log(boundary[:, 1]).mean()))
    d = halfplane_to_disk(np.column_stack([(boundary[:, 0] - x0) / y0, boundary[:, 1] / y0]))
    vals = np.column_stack([d, boundary[:, 2]])
    X = np.zeros((n, 3))
    X[ring] = vals
    A = L[free][:, free].tocsc()
    rhs = -L[free][:, ring] @ vals
    for k in range(3):
        X[free, k] = spsolve(A, rhs[:, k])
    X[:, :2] = disk_to_halfplane(X[:, :2]) * y0 + np.array([x0, 0.0])
    X[ring] = boundary
    return TriMesh(X, F, {"boundary": ring})


# --------------------------------------------------------------------------
# energy


def _scales(C, ambient):
    yc = C[:, :, 1].mean(axis=1)
    sxy = 1.0 / yc
    st = np.ones_like(yc) if ambient is AmbientKind.PRODUCT else 1.0 / yc
    return yc, sxy, st


def face_areas(V, F, ambient=AmbientKind.PRODUCT):
    C = V[F]
    yc, sxy, st = _scales(C, ambient)
    S = np.stack([sxy, sxy, st], axis=1)
    a = (C[:, 1] - C[:, 0]) * S
    b = (C[:, 2] - C[:, 0]) * S
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


def area_and_gradient(V, F, ambient=AmbientKind.PRODUCT):
    C = V[F]
    yc, sxy, st = _scales(C, ambient)
    S = np.stack([sxy, sxy, st], axis=1)
    e1, e2 = C[:, 1] - C[:, 0], C[:, 2] - C[:, 0]
    a, b = e1 * S, e2 * S
    n = np.cross(a, b)
    nn = np.linalg.norm(n, axis=1)
    if np.any(nn <= 0):
        raise NumericalError("degenerate triangle in Plateau mesh", {"faces": np.flatnonzero(nn <= 0)[:5].tolist()})
    nh = n / nn[:, None]
    dA_da = 0.5 * np.cross(b, nh)
    dA_db = 0.5 * np.cross(nh, a)
    g1 = dA_da * S
    g2 = dA_db * S
    # dependence of S on y_c
    dS = np.stack([-sxy / yc, -sxy / yc, -st / yc if ambient is not AmbientKind.PRODUCT else 0 * yc], axis=1)
    dyc = np.sum(dA_da * e1 * dS, axis=1) + np.sum(dA_db * e2 * dS, axis=1)
    G = np.zeros_like(V)
    np.add.at(G, F[:, 1], g1)
    np.add.at(G, F[:, 2], g2)
    np.add.at(G, F[:, 0], -(g1 + g2))
    for k in range(3):
        np.add.at(G[:, 1], F[:, k], dyc / 3.0)
    return float(0.5 * nn.sum()), G


def _frame_scale(V, ambient):
    y = V[:, 1]
    st = np.ones_like(y) if ambient is AmbientKind.PRODUCT else 1.0 / y
    return np.stack([1.0 / y, 1.0 / y, st], axis=1)


def vertex_normals(V, F, ambient=AmbientKind.PRODUCT):
    """Unit normals in the orthonormal frame, area-weighted over incident faces."""
    C = V[F]
    yc, sxy, st = _scales(C, ambient)
    S = np.stack([sxy, sxy, st], axis=1)
    n = 0.5 * np.cross((C[:, 1] - C[:, 0]) * S, (C[:, 2] - C[:, 0]) * S)
    N = np.zeros_like(V)
    for k in range(3):
        np.add.at(N, F[:, k], n)
    norm = np.linalg.norm(N, axis=1, keepdims=True)
    return N / np.where(norm > 0, norm, 1.0)


def vertex_areas(V, F, ambient=AmbientKind.PRODUCT):
    fa = face_areas(V, F, ambient)
    va = np.zeros(len(V))
    for k in range(3):
        np.add.at(va, F[:, k], fa / 3.0)
    return va


def mean_curvature_residual(V, F, free, ambient=AmbientKind.PRODUCT):
    """Max over free vertices of ``|<dA/dv, N>| / A_v``: the discrete mean curvature.

    ``dA/dv`` is read in the orthonormal frame (a covector scales by ``1/S``).
    """
    ambient = AmbientKind.parse(ambient)
    if not len(free):
        return 0.0
    _, G = area_and_gradient(V, F, ambient)
    Gf = G / _frame_scale(V, ambient)
    N = vertex_normals(V, F, ambient)
    h = np.abs(np.sum(Gf * N, axis=1)) / vertex_areas(V, F, ambient)
    return float(np.max(h[free]))


def triangle_quality(V, F, ambient=AmbientKind.PRODUCT):
    """``4 sqrt(3) A / sum l^2`` per face, in the centroid metric (1 for equilateral)."""
    C = V[F]
    yc, sxy, st = _scales(C, ambient)
    S = np.stack([sxy, sxy, st], axis=1)
    e = [(C[:, (k + 1) % 3] - C[:, k]) * S for k in range(3)]
    l2 = sum(np.sum(x * x, axis=1) for x in e)
    area = 0.5 * np.linalg.norm(np.cross(e[0], -e[2]), axis=1)
    return 4 * math.sqrt(3) * area / l2


# --------------------------------------------------------------------------
# solver


@dataclass
class PlateauResult:
    mesh: TriMesh
    residual: float
    area: float
    area_trace: list = field(default_factory=list)
    iterations: int = 0
    min_quality: float = math.nan

    def report(self):
        return {"residual": self.residual, "area": self.area, "iterations": self.iterations,
                "min_quality": self.min_quality, "n_vertices": self.mesh.n_vertices}


class PlateauSolver(BaseEstimator):
    """Area minimiser with fixed boundary (normal L-BFGS cycles plus tangential relaxation).

    ``fit(polygon)`` builds a harmonic initial disk at spacing ``target``;
    ``fit(polygon, init=mesh)`` starts from a given disk whose boundary is
    kept fixed.  ``mesh_`` and ``residual_`` hold the result.
    """

    def __init__(self, target=0.08, tol=1e-4, max_iter=20000, ambient="product",
                 min_quality=0.02, retries=1):
        self.target = target
        self.tol = tol
        self.max_iter = max_iter
        self.ambient = ambient
        self.min_quality = min_quality
        self.retries = retries

    def _init(self, polygon, target):
        P, eid = polygon.sample(target)
        if len(P) % 2:
            raise DomainError("boundary sample count must be even")
        mesh = harmonic_disk(P)
        ring = mesh.tags["boundary"]
        k = len(polygon.vertices)
        for e, name in enumerate(polygon.names):
            # the edge's samples plus the first sample of the next edge (its end vertex)
            nxt = ring[np.flatnonzero(eid == (e + 1) % k)[0]]
            mesh.tags[name] = np.append(ring[eid == e], nxt)
        return mesh

    def fit(self, polygon: Polygon, init: TriMesh = None):
        ambient = AmbientKind.parse(self.ambient)
        target = self.target
        for attempt in range(self.retries + 1):
            mesh = init if (init is not None and attempt == 0) else self._init(polygon, target)
            result = self._minimize(mesh, ambient)
            if result.min_quality >= self.min_quality:
                break
            log.warning("Plateau mesh degenerated (quality %.3g); remeshing", result.min_quality)
            target *= 0.7
        else:
            raise NumericalError("Plateau mesh degenerated after remeshing",
                                 {"min_quality": result.min_quality})
        self.result_ = result
        if result.residual > self.tol:
            raise NumericalError("Plateau residual above tolerance",
                                 {"residual": result.residual, "area_trace": result.area_trace[-5:]})
        self.result_ = result
        self.mesh_ = result.mesh
        self.residual_ = result.residual
        return self

    def _minimize(self, mesh, ambient, cycles=200, inner=200):
        V = mesh.vertices.copy()
        F = mesh.faces
        bnd = mesh.boundary_vertices()
        free = np.setdiff1d(np.arange(len(V)), bnd)
        relax = _Relaxer(F, len(V), free, ambient)
        trace = [area_and_gradient(V, F, ambient)[0]]
        it = 0
        res = mean_curvature_residual(V, F, free, ambient)
        for _ in range(cycles):
            if res <= self.tol or it >= self.max_iter:
                break
            V = relax(V, trace[-1])
            # move along frozen normals (chart components) so the parametrisation cannot slide
            N = vertex_normals(V, F, ambient)[free] / _frame_scale(V, ambient)[free]
            base = V[free].copy()
            # a quarter of the shortest incident edge per cycle keeps the fan at a corner from folding
            b = 0.25 * _local_edge(V, F, ambient)[free]

            def fun(s):
                W = V.copy()
                W[free] = base + s[:, None] * N
                if np.any(W[:, 1] <= 0):
                    return np.inf, np.zeros_like(s)
                A, G = area_and_gradient(W, F, ambient)
                return A, np.sum(G[free] * N, axis=1)

            out = minimize(fun, np.zeros(len(free)), jac=True, method="L-BFGS-B",
                           bounds=np.column_stack([-b, b]),
                           options={"maxiter": inner, "maxcor": 20, "gtol": 1e-15,
                                    "ftol": 1e-16, "maxls": 40})
            it += out.nit
            V[free] = base + out.x[:, None] * N
            trace.append(float(out.fun))
            res = mean_curvature_residual(V, F, free, ambient)
        q = float(triangle_quality(V, F, ambient).min())
        m = TriMesh(V, F, dict(mesh.tags))
        return PlateauResult(m, res, trace[-1], trace, it, q)


def _local_edge(V, F, ambient):
    _, sxy, st = _scales(V[F], ambient)
    S = np.column_stack([sxy, sxy, st])
    L = np.column_stack([np.linalg.norm((V[F[:, (k + 1) % 3]] - V[F[:, k]]) * S, axis=1)
                         for k in range(3)]).min(axis=1)
    out = np.full(len(V), np.inf)
    for k in range(3):
        np.minimum.at(out, F[:, k], L)
    return out


class _Relaxer:
    """Tangential umbrella smoothing, accepted only when the area does not grow.

    Normal-only descent cannot repair triangles that the corners squeeze, so
    every cycle first slides interior vertices inside their tangent planes.
    """

    def __init__(self, F, n, free, ambient):
        E = np.vstack([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        E = np.vstack([E, E[:, ::-1]])
        A = sp.csr_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(n, n))
        A.data[:] = 1.0
        self.adj, self.deg = A, np.asarray(A.sum(axis=1)).ravel()
        self.F, self.free, self.ambient = F, free, ambient

    def __call__(self, V, area):
        s = _frame_scale(V, self.ambient)
        U = ((self.adj @ V) / self.deg[:, None] - V) * s
        N = vertex_normals(V, self.F, self.ambient)
        U -= np.sum(U * N, axis=1)[:, None] * N
        step = (0.5 * U / s)[self.free]
        for theta in (1.0, 0.5, 0.25, 0.125):
            W = V.copy()
            W[self.free] += theta * step
            if np.all(W[:, 1] > 0) and area_and_gradient(W, self.F, self.ambient)[0] <= area:
                return W
        return V


def solve_plateau(polygon: Polygon, init: TriMesh = None, **kw) -> PlateauResult:
    return PlateauSolver(**kw).fit(polygon, init).result_
