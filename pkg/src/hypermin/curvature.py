"""Gaussian curvature bookkeeping: angle defects, boundary turning, smooth estimates.

Polyhedral quantities use metric edge lengths (metric frozen at edge
midpoints), so angle defects plus boundary turning equal ``2 pi chi`` to
rounding for any mesh.  The smooth estimate fits local quadratics to a
vertical graph ``t = u(x, y)`` and evaluates the Gauss equation

    K = -1/W^2 + y^4 (Hxx Hyy - Hxy^2) / W^4,   W^2 = 1 + y^2 |Du|^2,

with ``Hxx = -u_xx + u_y/y``, ``Hyy = -u_yy - u_y/y``, ``Hxy = -u_xy - u_x/y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError
from .graph_solver import QUAD_BARY, QUAD_W
from .hyperbolic import AmbientKind
from .mesh import TriMesh


# --------------------------------------------------------------------------
# polyhedral


def face_angles(mesh: TriMesh, ambient=AmbientKind.PRODUCT):
    """Interior angles ``(F, 3)`` from metric edge lengths."""
    L = mesh.face_edge_lengths(ambient)
    l0, l1, l2 = L[:, 0], L[:, 1], L[:, 2]
    slack = 1e-14 * L.max(axis=1)
    bad = np.flatnonzero((l0 >= l1 + l2 - slack) | (l1 >= l0 + l2 - slack) | (l2 >= l0 + l1 - slack))
    if bad.size:
        raise DomainError(f"degenerate triangle {int(bad[0])}")

    def ang(a, b, c):  # angle opposite a
        return np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1.0, 1.0))

    return np.stack([ang(l0, l1, l2), ang(l1, l2, l0), ang(l2, l0, l1)], axis=1)


def angle_sums(mesh: TriMesh, ambient=AmbientKind.PRODUCT):
    A = face_angles(mesh, ambient)
    s = np.zeros(mesh.n_vertices)
    np.add.at(s, mesh.faces.ravel(), A.ravel())
    return s


def angle_defects(mesh: TriMesh, ambient=AmbientKind.PRODUCT):
    """``2 pi - angle sum`` at interior vertices, 0 elsewhere."""
    s = angle_sums(mesh, ambient)
    out = np.zeros(mesh.n_vertices)
    inner = mesh.interior_mask()
    out[inner] = 2 * math.pi - s[inner]
    return out


def gaussian_total(mesh: TriMesh, ambient=AmbientKind.PRODUCT):
    """Discrete ``int K dA``: the sum of interior angle defects."""
    return float(np.sum(angle_defects(mesh, ambient)))


def _check_loop(mesh: TriMesh, loop):
    loop = np.asarray(loop, dtype=np.int64)
    if len(loop) < 3:
        raise DomainError("a loop needs at least three vertices")
    bnd = {tuple(e) for e in mesh.boundary_edges()}
    for a, b in zip(loop, np.roll(loop, -1)):
        if (min(a, b), max(a, b)) not in bnd:
            raise DomainError("vertex sequence is not a closed boundary polyline")
    return loop


def loop_length(mesh: TriMesh, loop, ambient=AmbientKind.PRODUCT):
    """Metric length of a closed boundary loop, using lifted face corners."""
    loop = _check_loop(mesh, loop)
    # find, for each boundary edge, a face containing it and take its lifted corners
    C = mesh.corner_points()
    from .hyperbolic import segment_length

    edge_face = {}
    for f, tri in enumerate(mesh.faces):
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            edge_face.setdefault((min(a, b), max(a, b)), (f, k))
    total = 0.0
    for a, b in zip(loop, np.roll(loop, -1)):
        f, k = edge_face[(min(a, b), max(a, b))]
        total += float(segment_length(C[f, k], C[f, (k + 1) % 3], ambient))
    return total


def geodesic_curvature_loop(mesh: TriMesh, loop, ambient=AmbientKind.PRODUCT):
    """``(sum of turning angles, length)`` of a closed boundary loop."""
    loop = _check_loop(mesh, loop)
    s = angle_sums(mesh, ambient)
    turning = float(np.sum(math.pi - s[loop]))
    return turning, loop_length(mesh, loop, ambient)


def gauss_bonnet_check(mesh: TriMesh, chi=None, ambient=AmbientKind.PRODUCT):
    """``total K + sum of boundary turning - 2 pi chi`` (0 to rounding)."""
    chi = mesh.euler_characteristic() if chi is None else chi
    s = angle_sums(mesh, ambient)
    total = gaussian_total(mesh, ambient)
    turning = 0.0
    for loop in mesh.boundary_loops():
        turning += float(np.sum(math.pi - s[loop]))
    return total + turning - 2 * math.pi * chi


@dataclass
class CurvatureReport:
    total_K: float
    boundary_terms: list
    chi_truncated: int
    gb_defect: float
    y_cut: float = math.nan
    polyhedral_total: float = math.nan

    def to_dict(self):
        return {"total_K": self.total_K, "boundary_terms": self.boundary_terms,
                "chi_truncated": self.chi_truncated, "gb_defect": self.gb_defect,
                "y_cut": self.y_cut, "polyhedral_total": self.polyhedral_total}


def curvature_report(mesh: TriMesh, smooth_total=None, y_cut=math.nan,
                     ambient=AmbientKind.PRODUCT) -> CurvatureReport:
    """Polyhedral bookkeeping; ``gb_defect`` uses the smooth total when given."""
    chi = mesh.euler_characteristic()
    s = angle_sums(mesh, ambient)
    terms, turning = [], 0.0
    for i, loop in enumerate(mesh.boundary_loops()):
        kg = float(np.sum(math.pi - s[loop]))
        terms.append({"loop": i, "kg": kg, "length": loop_length(mesh, loop, ambient),
                      "n_vertices": int(len(loop))})
        turning += kg
    poly = gaussian_total(mesh, ambient)
    total = poly if smooth_total is None else smooth_total
    return CurvatureReport(total, terms, chi, total + turning - 2 * math.pi * chi, y_cut, poly)


# --------------------------------------------------------------------------
# smooth estimate for vertical graphs


def _two_ring(faces, n):
    r = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    A = sp.coo_matrix((np.ones(len(r)), (r[:, 0], r[:, 1])), shape=(n, n)).tocsr()
    A = ((A + A.T + sp.identity(n)) > 0).astype(np.int8)
    return (A @ A).tocsr()


def graph_derivatives(xy, u, faces):
    """First and second derivatives of ``u`` at the vertices by local quadratic fits.

    Each fit uses the 2-ring, in coordinates scaled by the local height, which
    are normal coordinates of the half-plane metric to first order.
    """
    xy = np.asarray(xy, dtype=float)
    u = np.asarray(u, dtype=float)
    n = len(xy)
    R = _two_ring(np.asarray(faces), n)
    out = np.zeros((n, 5))  # ux, uy, uxx, uxy, uyy
    for i in range(n):
        nb = R.indices[R.indptr[i]:R.indptr[i + 1]]
        y0 = xy[i, 1]
        d = (xy[nb] - xy[i]) / y0
        if len(nb) < 6:
            raise DomainError(f"vertex {i} has too few neighbours for a quadratic fit")
        M = np.column_stack([np.ones(len(nb)), d[:, 0], d[:, 1],
                             0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1], 0.5 * d[:, 1] ** 2])
        coef, *_ = np.linalg.lstsq(M, u[nb], rcond=None)
        out[i] = [coef[1] / y0, coef[2] / y0, coef[3] / y0 ** 2, coef[4] / y0 ** 2,
                  coef[5] / y0 ** 2]
    return out


def graph_curvature_formula(y, ux, uy, uxx, uxy, uyy):
    W2 = 1.0 + y * y * (ux * ux + uy * uy)
    hxx = -uxx + uy / y
    hyy = -uyy - uy / y
    hxy = -uxy - ux / y
    return -1.0 / W2 + y ** 4 * (hxx * hyy - hxy ** 2) / W2 ** 2


def graph_curvature(xy, u, faces):
    """Per-vertex Gaussian curvature of the graph ``t = u`` over half-plane points."""
    D = graph_derivatives(xy, u, faces)
    return graph_curvature_formula(np.asarray(xy)[:, 1], *D.T)


def graph_area_element_integral(xy, u, faces, f_vertex):
    """``int f dA`` with ``f`` linear on faces and the exact P1 graph area element."""
    xy = np.asarray(xy, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    P = xy[faces]
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    two_a = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    d = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    G = np.stack([-d[..., 1], d[..., 0]], axis=-1) / two_a[:, None, None]
    p = np.einsum("fk,fkd->fd", np.asarray(u)[faces], G)
    yq = np.einsum("qk,fk->fq", QUAD_BARY, P[..., 1])
    fq = np.einsum("qk,fk->fq", QUAD_BARY, np.asarray(f_vertex)[faces])
    dA = np.sqrt(1 + yq ** 2 * np.sum(p * p, axis=1)[:, None]) / yq ** 2
    return float(np.sum(0.5 * np.abs(two_a)[:, None] * QUAD_W[None] * fq * dA))


def smooth_total_curvature(xy, u, faces, face_mask=None):
    K = graph_curvature(xy, u, faces)
    faces = np.asarray(faces)
    if face_mask is not None:
        faces = faces[np.asarray(face_mask, dtype=bool)]
    return graph_area_element_integral(xy, u, faces, K), K


# --------------------------------------------------------------------------
# truncation ladders


@dataclass
class TruncationSeries:
    cuts: list
    totals: list
    order: float = 2.0
    extrapolated_total: float = field(init=False)

    def __post_init__(self):
        if len(self.cuts) != len(self.totals) or len(self.cuts) < 1:
            raise DomainError("cuts and totals must match")
        if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
            raise DomainError("cuts must be strictly increasing")
        self.extrapolated_total = richardson(self.cuts, self.totals, self.order)

    def gaps(self):
        return [abs(b - a) for a, b in zip(self.totals, self.totals[1:])]

    def monotone(self):
        d = np.diff(self.totals)
        return bool(np.all(d < 0) or np.all(d > 0))

    def to_dict(self):
        return {"cuts": list(self.cuts), "totals": list(self.totals), "order": self.order,
                "extrapolated_total": self.extrapolated_total, "gaps": self.gaps()}


def richardson(cuts, totals, order=2.0):
    """Extrapolate ``T(y) = T_inf + c y^-order`` from the two largest cuts."""
    if len(cuts) < 2:
        return float(totals[-1])
    y1, y2 = cuts[-2], cuts[-1]
    t1, t2 = totals[-2], totals[-1]
    w1, w2 = y1 ** order, y2 ** order
    return float((w2 * t2 - w1 * t1) / (w2 - w1))


# --------------------------------------------------------------------------
# corollaries


@dataclass(frozen=True)
class Verdict:
    status: str  # "allowed", "vertical_only" or "forbidden"
    reason: str

    @property
    def allowed(self):
        return self.status != "forbidden"

    def to_dict(self):
        return {"status": self.status, "reason": self.reason}


def obstruction_check(g: int, n: int, ambient=AmbientKind.PRODUCT) -> Verdict:
    """Topological test from ``int K = 2 pi chi`` and the Gauss equation."""
    if g < 0 or n < 0:
        raise DomainError("genus and punctures must be non-negative")
    ambient = AmbientKind.parse(ambient)
    chi = 2 - 2 * g - n
    if chi > 0:
        return Verdict("forbidden", f"chi = {chi} > 0 but total curvature is non-positive")
    if ambient is AmbientKind.HYPERBOLIC:
        if 2 * g + n - 2 <= 0:
            return Verdict("forbidden", "chi = 0 needs K_sigma = 0, impossible when K_sigma = -1")
        return Verdict("allowed", "no obstruction from total curvature")
    if chi == 0:
        what = "gamma x S^1 with gamma a complete geodesic" if g == 0 else \
            "a vertical torus over a closed geodesic"
        return Verdict("vertical_only", f"chi = 0 forces K_e = K_sigma = 0: {what}")
    return Verdict("allowed", "no obstruction from total curvature")


@dataclass
class AreaBoundReport:
    bound: float
    areas: list
    extrapolated_area: float
    violation: bool
    slack: float

    def to_dict(self):
        return {"bound": self.bound, "areas": self.areas, "extrapolated_area": self.extrapolated_area,
                "violation": self.violation, "slack": self.slack}


def area_bound(g: int, n: int):
    return 2 * math.pi * (2 * g + n - 2)


def area_bound_check(areas, g: int, n: int, cuts=None, tol=1e-2, order=1.0) -> AreaBoundReport:
    """Compare an area ladder in the hyperbolic cusp model against ``2 pi (2g + n - 2)``.

    ``areas`` may be a single value or one value per truncation in ``cuts``.
    """
    areas = list(np.atleast_1d(np.asarray(areas, dtype=float)))
    bound = area_bound(g, n)
    if cuts is not None and len(areas) > 1:
        ext = richardson(list(cuts), areas, order)
    else:
        ext = areas[-1]
    slack = bound - ext
    return AreaBoundReport(bound, areas, float(ext), bool(ext > bound * (1 + tol) + tol), float(slack))
