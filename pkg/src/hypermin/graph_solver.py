"""Minimal vertical graphs ``t = u`` over domains of H^2.

In a conformal chart with metric ``(dx^2 + dy^2) / rho^2`` the area of the graph
is ``A(u) = int sqrt(1 + rho^2 |Du|^2) / rho^2``.  The discrete problem uses P1
elements and a 7-point degree-5 triangle rule; the minimiser is found by
damped Newton on the free (non-Dirichlet) vertices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError, NumericalError
from .hyperbolic import disk_to_halfplane, halfplane_to_disk
from .mesh import TriMesh

log = logging.getLogger(__name__)

# Dunavant degree-5 rule: barycentric points and weights (weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180021983] * 3)


# --------------------------------------------------------------------------
# charts


class Chart:
    name = "abstract"

    def rho(self, pts):
        raise NotImplementedError

    def to_halfplane(self, pts):
        raise NotImplementedError

    def from_halfplane(self, pts):
        raise NotImplementedError


class HalfPlaneChart(Chart):
    name = "halfplane"

    def rho(self, pts):
        return np.asarray(pts)[..., 1]

    def to_halfplane(self, pts):
        return np.array(pts, dtype=float, copy=True)

    def from_halfplane(self, pts):
        return np.array(pts, dtype=float, copy=True)


class StripChart(Chart):
    """``(s, theta)`` with ``w = exp(s + i theta)``; metric ``(ds^2 + dtheta^2) / sin^2 theta``.

    ``theta = pi/2`` is the geodesic through ``i`` and 0; ``s = const`` are the
    geodesics orthogonal to it.
    """

    name = "strip"

    def rho(self, pts):
        return np.sin(np.asarray(pts)[..., 1])

    def to_halfplane(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.exp(pts[..., 0])
        return np.stack([r * np.cos(pts[..., 1]), r * np.sin(pts[..., 1])], axis=-1)

    def from_halfplane(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack([0.5 * np.log(pts[..., 0] ** 2 + pts[..., 1] ** 2),
                         np.arctan2(pts[..., 1], pts[..., 0])], axis=-1)


class DiskChart(Chart):
    name = "disk"

    def rho(self, pts):
        pts = np.asarray(pts)
        return 0.5 * (1.0 - pts[..., 0] ** 2 - pts[..., 1] ** 2)

    def to_halfplane(self, pts):
        return disk_to_halfplane(pts)

    def from_halfplane(self, pts):
        return halfplane_to_disk(pts)


CHARTS = {c.name: c for c in (HalfPlaneChart(), StripChart(), DiskChart())}


def get_chart(name):
    if isinstance(name, Chart):
        return name
    try:
        return CHARTS[str(name)]
    except KeyError:
        raise DomainError(f"unknown chart {name!r}") from None


# --------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryDatum:
    """``finite`` / ``affine`` / ``plus_inf`` / ``minus_inf`` / ``asymptotic``.

    ``affine`` is ``c0 + cx*x + cy*y`` in half-plane coordinates, so the data
    does not depend on the chart used for meshing.
    """

    kind: str
    value: float = 0.0
    cx: float = 0.0
    cy: float = 0.0

    KINDS = ("finite", "affine", "plus_inf", "minus_inf", "asymptotic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown boundary datum {self.kind!r}")

    @classmethod
    def finite(cls, value):
        return cls("finite", float(value))

    @classmethod
    def affine(cls, c0, cx=0.0, cy=0.0):
        return cls("affine", float(c0), float(cx), float(cy))

    @classmethod
    def plus_inf(cls):
        return cls("plus_inf")

    @classmethod
    def minus_inf(cls):
        return cls("minus_inf")

    @classmethod
    def asymptotic(cls, value):
        return cls("asymptotic", float(value))

    @property
    def infinite(self):
        return self.kind in ("plus_inf", "minus_inf")

    def evaluate(self, hp_points, Lambda=None):
        n = len(hp_points)
        if self.kind == "plus_inf" or self.kind == "minus_inf":
            if Lambda is None:
                raise DomainError("infinite boundary data needs a truncation level")
            return np.full(n, Lambda if self.kind == "plus_inf" else -Lambda)
        if self.kind == "affine":
            return self.value + self.cx * hp_points[:, 0] + self.cy * hp_points[:, 1]
        return np.full(n, self.value)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind in ("finite", "asymptotic", "affine"):
            d["value"] = self.value
        if self.kind == "affine":
            d.update(cx=self.cx, cy=self.cy)
        return d

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls.finite(d)
        if isinstance(d, str):
            key = d.strip().lower()
            if key in ("+inf", "inf", "plus_inf"):
                return cls.plus_inf()
            if key in ("-inf", "minus_inf"):
                return cls.minus_inf()
            raise DomainError(f"cannot parse boundary datum {d!r}")
        return cls(str(d["kind"]), float(d.get("value", 0.0)), float(d.get("cx", 0.0)),
                   float(d.get("cy", 0.0)))


# --------------------------------------------------------------------------
# problem


@dataclass
class GraphProblem:
    """A triangulated (truncated) domain in a chart, with data on named arcs.

    ``arcs`` maps arc names to boundary vertex ids; a vertex on several arcs
    takes the smallest of their values.
    """

    points: np.ndarray
    faces: np.ndarray
    arcs: dict
    data: dict
    chart: Chart = field(default_factory=HalfPlaneChart)
    Lambda: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self.chart = get_chart(self.chart)
        self.arcs = {k: np.asarray(v, dtype=np.int64) for k, v in self.arcs.items()}
        missing = set(self.arcs) - set(self.data)
        if missing:
            raise DomainError(f"no boundary data for arcs {sorted(missing)}")
        if all(self.data[k].infinite for k in self.arcs):
            raise DomainError("at least one arc must carry finite data")
        if any(self.data[k].infinite for k in self.arcs):
            if self.Lambda is None:
                raise DomainError("infinite data needs a truncation level Lambda")
            finite_max = max((np.abs(self._raw(k)).max() for k in self.arcs
                              if not self.data[k].infinite), default=0.0)
            if not self.Lambda > finite_max:
                raise DomainError("Lambda must exceed all finite boundary data")

    @property
    def hp_points(self):
        return self.chart.to_halfplane(self.points)

    def _raw(self, name):
        ids = self.arcs[name]
        return self.data[name].evaluate(self.chart.to_halfplane(self.points[ids]), self.Lambda)

    def dirichlet(self):
        """``(ids, values)`` of all constrained vertices."""
        vals = {}
        for name in self.arcs:
            for i, v in zip(self.arcs[name], self._raw(name)):
                vals[int(i)] = min(vals.get(int(i), math.inf), float(v))
        ids = np.array(sorted(vals), dtype=np.int64)
        return ids, np.array([vals[i] for i in ids])

    def with_Lambda(self, Lambda):
        return GraphProblem(self.points, self.faces, self.arcs, self.data, self.chart, Lambda,
                            dict(self.meta))


# --------------------------------------------------------------------------
# discrete area


def _geometry(points, faces):
    P = points[faces]  # (F, 3, 2)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    two_a = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    scale = max(np.abs(points).max(), 1.0) ** 2
    bad = np.flatnonzero(np.abs(two_a) <= 1e-14 * scale)
    if bad.size:
        raise DomainError(f"degenerate triangle {int(bad[0])}")
    d = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    G = np.stack([-d[..., 1], d[..., 0]], axis=-1) / two_a[:, None, None]
    qp = np.einsum("qk,fkd->fqd", QUAD_BARY, P)
    return G, 0.5 * np.abs(two_a), qp


class _Functional:
    """Area functional on a fixed mesh; caches geometry and rho at quadrature points."""

    def __init__(self, points, faces, chart):
        self.faces = faces
        self.n = len(points)
        self.G, self.area, qp = _geometry(points, faces)
        self.rho = chart.rho(qp)
        if np.any(self.rho <= 0):
            raise DomainError("mesh leaves the model (rho <= 0 at a quadrature point)")
        self.r2 = self.rho ** 2
        self.wa = QUAD_W[None, :] * self.area[:, None]

    def grad_u(self, u):
        return np.einsum("fk,fkd->fd", u[self.faces], self.G)

    def energy(self, u):
        p = self.grad_u(u)
        s = np.sqrt(1.0 + self.r2 * np.sum(p * p, axis=1)[:, None])
        return float(np.sum(self.wa * s / self.r2))

    def gradient(self, u):
        p = self.grad_u(u)
        s = np.sqrt(1.0 + self.r2 * np.sum(p * p, axis=1)[:, None])
        c = np.sum(self.wa / s, axis=1)  # (F,)
        local = np.einsum("fkd,fd->fk", self.G, p) * c[:, None]
        g = np.zeros(self.n)
        np.add.at(g, self.faces.ravel(), local.ravel())
        return g

    def hessian(self, u):
        p = self.grad_u(u)
        s = np.sqrt(1.0 + self.r2 * np.sum(p * p, axis=1)[:, None])
        a = np.sum(self.wa / s, axis=1)
        b = np.sum(self.wa * self.r2 / s ** 3, axis=1)
        B = a[:, None, None] * np.eye(2)[None] - b[:, None, None] * np.einsum("fi,fj->fij", p, p)
        K = np.einsum("fid,fde,fje->fij", self.G, B, self.G)
        rows = np.repeat(self.faces, 3, axis=1).ravel()
        cols = np.tile(self.faces, (1, 3)).ravel()
        return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(self.n, self.n))

    def laplacian(self):
        K = np.einsum("fid,fjd->fij", self.G, self.G) * self.area[:, None, None]
        rows = np.repeat(self.faces, 3, axis=1).ravel()
        cols = np.tile(self.faces, (1, 3)).ravel()
        return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(self.n, self.n))


def area(points, faces, u, chart="halfplane"):
    """Discrete graph area of the P1 function ``u``."""
    return _Functional(np.asarray(points, float), np.asarray(faces, np.int64),
                       get_chart(chart)).energy(np.asarray(u, dtype=float))


def hyperbolic_area(points, faces, chart="halfplane"):
    """Area of the triangulated domain itself (``u = const``)."""
    return area(points, faces, np.zeros(len(points)), chart)


def graph_residual(points, faces, u, chart="halfplane"):
    """Max ``|dA/du|`` over interior vertices of the mesh."""
    faces = np.asarray(faces, np.int64)
    F = _Functional(np.asarray(points, float), faces, get_chart(chart))
    g = F.gradient(np.asarray(u, dtype=float))
    free = np.setdiff1d(np.unique(faces), _mesh_boundary(faces))
    return float(np.abs(g[free]).max()) if free.size else 0.0


# --------------------------------------------------------------------------
# solution and solver


@dataclass
class GraphSolution:
    problem: GraphProblem
    u: np.ndarray
    residual: float
    energy: float
    energy_trace: list
    iterations: int

    @property
    def Lambda(self):
        return self.problem.Lambda

    def surface_mesh(self) -> TriMesh:
        """The graph as a mesh in half-plane coordinates ``(x, y, t)``."""
        hp = self.problem.hp_points
        tags = {k: v for k, v in self.problem.arcs.items()}
        return TriMesh(np.column_stack([hp, self.u]), self.problem.faces, tags)

    def report(self):
        return {
            "residual": self.residual, "energy": self.energy,
            "min_u": float(self.u.min()), "max_u": float(self.u.max()),
            "Lambda": self.Lambda, "y_cap": self.problem.meta.get("y_cap"),
            "iterations": self.iterations, "n_vertices": int(len(self.u)),
        }


class MinimalGraphSolver(BaseEstimator):
    """Damped Newton for the discrete graph area.

    ``fit(problem)`` solves; ``predict(points)`` evaluates the P1 solution at
    chart points.
    """

    def __init__(self, tol=1e-8, max_iter=60, max_halvings=40, check_max_principle=True):
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.check_max_principle = check_max_principle

    def fit(self, problem: GraphProblem, u0=None):
        F = _Functional(problem.points, problem.faces, problem.chart)
        ids, vals = problem.dirichlet()
        n = len(problem.points)
        used = np.zeros(n, dtype=bool)
        used[problem.faces.ravel()] = True
        boundary = _mesh_boundary(problem.faces)
        uncovered = np.setdiff1d(boundary, ids)
        if uncovered.size:
            raise DomainError(f"{uncovered.size} boundary vertices carry no data")
        free = np.setdiff1d(np.flatnonzero(used), ids)

        u = np.zeros(n)
        u[ids] = vals
        if u0 is not None:
            u[free] = np.asarray(u0, dtype=float)[free]
        elif np.ptp(vals) == 0.0:
            u[free] = vals[0]
        elif free.size:
            L = F.laplacian()
            Lff = L[free][:, free]
            rhs = -L[free][:, ids] @ vals
            u[free] = spsolve(Lff.tocsc(), rhs)

        E = F.energy(u)
        trace = [E]
        g = F.gradient(u)
        res = float(np.abs(g[free]).max()) if free.size else 0.0
        it = 0
        while res > self.tol:
            if it >= self.max_iter:
                raise NumericalError("Newton did not reach tolerance",
                                     {"energy_trace": trace, "residual": res})
            H = F.hessian(u)
            delta = spsolve(H[free][:, free].tocsc(), -g[free])
            step = 1.0
            for _ in range(self.max_halvings + 1):
                trial = u.copy()
                trial[free] += step * delta
                Et = F.energy(trial)
                if Et <= E + 4 * np.finfo(float).eps * abs(E):
                    break
                step *= 0.5
            else:
                raise NumericalError("Newton line search stagnated",
                                     {"energy_trace": trace, "residual": res})
            u, E = trial, Et
            trace.append(E)
            g = F.gradient(u)
            new_res = float(np.abs(g[free]).max())
            it += 1
            if new_res >= res and step < 1e-6:
                raise NumericalError("Newton stagnated", {"energy_trace": trace, "residual": new_res})
            res = new_res

        if self.check_max_principle and free.size:
            lo, hi = vals.min(), vals.max()
            slack = 1e-9 * max(1.0, abs(lo), abs(hi))
            if u[free].min() < lo - slack or u[free].max() > hi + slack:
                raise NumericalError("discrete maximum principle violated (internal error)",
                                     {"range": (float(u[free].min()), float(u[free].max())),
                                      "data": (float(lo), float(hi))})

        self.problem_ = problem
        self.solution_ = GraphSolution(problem, u, res, E, trace, it)
        self.u_ = u
        self.residual_ = res
        self._locator = None
        return self

    def predict(self, X):
        """Values of the P1 solution at chart points ``X`` (``nan`` outside the mesh)."""
        check_is_fitted(self, "u_")
        X = check_array(X, dtype=float)
        if self._locator is None:
            self._locator = PointLocator(self.problem_.points, self.problem_.faces)
        face, bary = self._locator.locate(X)
        out = np.full(len(X), np.nan)
        ok = face >= 0
        out[ok] = np.sum(self.u_[self.problem_.faces[face[ok]]] * bary[ok], axis=1)
        return out


def solve(problem: GraphProblem, **kw) -> GraphSolution:
    return MinimalGraphSolver(**kw).fit(problem).solution_


def _mesh_boundary(faces):
    e = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1])


class PointLocator:
    """Barycentric point location by nearest-centroid candidates."""

    def __init__(self, points, faces, k=12):
        self.points, self.faces, self.k = points, faces, min(k, len(faces))
        self.tree = cKDTree(points[faces].mean(axis=1))

    def _bary(self, fids, X):
        P = self.points[self.faces[fids]]
        T = np.stack([P[..., 1, :] - P[..., 0, :], P[..., 2, :] - P[..., 0, :]], axis=-1)
        lam = np.linalg.solve(T, (X - P[:, 0, :])[..., None])[..., 0]
        return np.concatenate([1 - lam.sum(-1, keepdims=True), lam], axis=-1)

    def locate(self, X, eps=1e-10):
        _, cand = self.tree.query(X, k=self.k)
        cand = np.atleast_2d(cand).reshape(len(X), -1)
        face = -np.ones(len(X), dtype=np.int64)
        bary = np.zeros((len(X), 3))
        for j in range(cand.shape[1]):
            todo = face < 0
            if not np.any(todo):
                break
            b = self._bary(cand[todo, j], X[todo])
            hit = np.all(b >= -eps, axis=1)
            idx = np.flatnonzero(todo)[hit]
            face[idx] = cand[todo, j][hit]
            bary[idx] = b[hit]
        todo = np.flatnonzero(face < 0)
        for i in todo:  # exhaustive fallback
            b = self._bary(np.arange(len(self.faces)), np.broadcast_to(X[i], (len(self.faces), 2)))
            hit = np.flatnonzero(np.all(b >= -eps, axis=1))
            if hit.size:
                face[i], bary[i] = hit[0], b[hit[0]]
        return face, bary


# --------------------------------------------------------------------------
# simple domains


def quadrilateral(x_range=(-1.0, 1.0), y_range=(1.0, 2.0), n=(16, 16), data=None, Lambda=None):
    """Truncated quadrilateral ``[x0, x1] x [y0, y1]`` in the half-plane chart.

    The sides ``x = const`` are geodesics, ``y = const`` horocycles.  Heights
    are spaced geometrically so cells have comparable hyperbolic size.
    """
    nx, ny = int(n[0]), int(n[1])
    xs = np.linspace(*x_range, nx + 1)
    ys = np.geomspace(*y_range, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    faces = _crisscross(nx + 1, ny + 1)
    idx = np.arange(len(pts)).reshape(nx + 1, ny + 1)
    arcs = {"left": idx[0, :], "right": idx[-1, :], "bottom": idx[:, 0], "top": idx[:, -1]}
    data = data or {k: BoundaryDatum.finite(0.0) for k in arcs}
    if isinstance(data, BoundaryDatum):
        data = {k: data for k in arcs}
    return GraphProblem(pts, faces, arcs, data, HalfPlaneChart(), Lambda,
                        {"domain": "quadrilateral", "y_cap": float(y_range[1])})


def _crisscross(nu, nv):
    """Grid faces with diagonals alternating by cell parity (no preferred direction)."""
    i, j = np.meshgrid(np.arange(nu - 1), np.arange(nv - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * nv + j
    b, c, d = a + nv, a + nv + 1, a + 1
    even = (i + j) % 2 == 0
    t1 = np.where(even[:, None], np.stack([a, b, c], 1), np.stack([a, b, d], 1))
    t2 = np.where(even[:, None], np.stack([a, c, d], 1), np.stack([b, c, d], 1))
    return np.concatenate([t1, t2])


def omega_n(n, ds=0.04, n_theta=48, theta_cap=0.05, Lambda=8.0):
    """Domain between the two geodesics of index ``n`` in the strip chart.

    In the disk these are orthogonal to the horizontal diameter through
    ``(+-(1 - 1/n), 0)``, i.e. at distance ``ln(2n - 1)`` from the origin, which
    is ``s = +-ln(2n - 1)`` here.  ``s`` is rounded to the ``ds`` grid so the
    meshes of increasing ``n`` are nested.  ``theta`` is spaced uniformly in
    ``log tan(theta / 2)`` and capped at ``theta_cap`` from the ideal boundary.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    d = math.log(2 * n - 1)
    k = max(int(round(d / ds)), 1)
    ss = ds * np.arange(-k, k + 1)
    sig = math.log(math.tan(theta_cap / 2))
    th = 2 * np.arctan(np.exp(np.linspace(sig, -sig, n_theta + 1)))
    th[n_theta // 2] = math.pi / 2 if n_theta % 2 == 0 else th[n_theta // 2]
    S, TH = np.meshgrid(ss, th, indexing="ij")
    pts = np.column_stack([S.ravel(), TH.ravel()])
    faces = _crisscross(len(ss), len(th))
    idx = np.arange(len(pts)).reshape(len(ss), len(th))
    arcs = {"gamma_minus": idx[0, :], "gamma_plus": idx[-1, :],
            "ideal_low": idx[:, 0], "ideal_high": idx[:, -1]}
    data = {"gamma_minus": BoundaryDatum.plus_inf(), "gamma_plus": BoundaryDatum.plus_inf(),
            "ideal_low": BoundaryDatum.asymptotic(0.0), "ideal_high": BoundaryDatum.asymptotic(0.0)}
    return GraphProblem(pts, faces, arcs, data, StripChart(), Lambda,
                        {"domain": "omega_n", "n": int(n), "d": float(k * ds),
                         "theta_cap": float(theta_cap), "ds": float(ds)})


def prop61_ladder(n_list=(2, 4, 8, 16), K=(math.pi / 4, 3 * math.pi / 4), Lambda=8.0,
                  ds=0.04, n_theta=48, theta_cap=0.05, tol=1e-8):
    """Solve on the nested domains and report ``sup u_n`` over ``s = 0``, ``theta in K``.

    Returns ``(rows, solutions)``; rows are ``(n, sup)``.  Monotonicity of the
    pointwise values on common vertices is checked by the caller.
    """
    n_list = list(n_list)
    if sorted(n_list) != n_list:
        raise DomainError("n_list must be increasing")
    rows, sols = [], []
    for n in n_list:
        prob = omega_n(n, ds, n_theta, theta_cap, Lambda)
        sol = solve(prob, tol=tol)
        pts = prob.points
        on = (np.abs(pts[:, 0]) < 0.5 * ds) & (pts[:, 1] >= K[0] - 1e-12) & (pts[:, 1] <= K[1] + 1e-12)
        rows.append((n, float(sol.u[on].max())))
        sols.append(sol)
    return rows, sols


def nested_difference(coarse: GraphSolution, fine: GraphSolution):
    """``max(u_fine - u_coarse)`` over the common vertices (matched by position)."""
    tree = cKDTree(fine.problem.points)
    d, j = tree.query(coarse.problem.points)
    if d.max() > 1e-9:
        raise DomainError("meshes are not nested")
    return float(np.max(fine.u[j] - coarse.u))


def lambda_ladder(problem: GraphProblem, Lambdas, tol=1e-8):
    """Solve for increasing truncation levels; rows ``(Lambda, max u, Cauchy gap)``."""
    rows, prev = [], None
    for L in Lambdas:
        sol = solve(problem.with_Lambda(L), tol=tol)
        gap = None if prev is None else float(np.abs(sol.u - prev.u).max())
        rows.append({"Lambda": float(L), "max_u": float(sol.u.max()), "cauchy_gap": gap,
                     "residual": sol.residual})
        prev = sol
    return rows
