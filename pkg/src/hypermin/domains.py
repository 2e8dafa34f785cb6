"""Truncated ideal polygons for the worked examples, meshed in the half-plane chart.

The ideal triangle of Example 1 sits at ``A = inf``, ``B = 0``, ``C = -1`` with
sides ``a = AB`` (``x = 0``), ``b = BC`` (the semicircle over ``[-1, 0]``) and
``c = CA`` (``x = -1``).  ``rho(w) = -1 / (w + 1)`` permutes the vertices
``A -> B -> C`` and the sides ``c -> a -> b``, so one structured cusp strip at
``A`` produces the other two; the remaining compact hexagon is meshed with
Shewchuk's Triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle as tr

from .exceptions import DomainError
from .graph_solver import BoundaryDatum, GraphProblem, HalfPlaneChart, _crisscross
from .hyperbolic import disk_to_halfplane

RHO = ((0.0, -1.0), (1.0, 1.0))
CENTER = complex(-0.5, math.sqrt(3) / 2)


class Tabulated:
    """Boundary values given per arc vertex (not serialisable)."""

    infinite = False

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def evaluate(self, hp_points, Lambda=None):
        if len(hp_points) != len(self.values):
            raise DomainError("tabulated data does not match the arc")
        return self.values.copy()


def mobius(mat, xy):
    (a, b), (c, d) = mat
    z = np.asarray(xy, dtype=float)[..., 0] + 1j * np.asarray(xy, dtype=float)[..., 1]
    w = (a * z + b) / (c * z + d)
    return np.stack([w.real, w.imag], axis=-1)


def rho_power(xy, k):
    out = np.asarray(xy, dtype=float)
    for _ in range(k % 3):
        out = mobius(RHO, out)
    return out


def to_centered_disk(xy):
    z = xy[..., 0] + 1j * xy[..., 1]
    w = (z - CENTER) / (z - CENTER.conjugate())
    return np.stack([w.real, w.imag], axis=-1)


def from_centered_disk(xy):
    w = xy[..., 0] + 1j * xy[..., 1]
    z = (CENTER - CENTER.conjugate() * w) / (1 - w)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass
class CuspStrip:
    """Structured strip ``{2 <= y' <= y_cut}`` in the cusp's own coordinates.

    ``grid[k, j]`` is the vertex id at row ``k`` (height ``ys[k]``) and column
    ``j`` (``x' = xs[j]``).  ``k_pull`` is the power of ``rho`` taking cusp
    coordinates to the half-plane chart.
    """

    name: str
    k_pull: int
    xs: np.ndarray
    ys: np.ndarray
    grid: np.ndarray

    def to_cusp(self, xy):
        return rho_power(xy, -self.k_pull)

    def row_of(self, y):
        k = int(np.argmin(np.abs(self.ys - y)))
        if abs(self.ys[k] - y) > 1e-9 * y:
            raise DomainError(f"no mesh row at y = {y}")
        return k


@dataclass
class IdealTriangleMesh:
    problem: GraphProblem
    strips: dict
    h: float
    y_cut: float
    meta: dict = field(default_factory=dict)


def _strip_rows(y_cut, rows_per_octave):
    octaves = math.log2(y_cut / 2.0)
    n = int(round(octaves * rows_per_octave))
    if abs(n - octaves * rows_per_octave) > 1e-9 or n < 1:
        raise DomainError("y_cut / 2 must be a power of two compatible with rows_per_octave")
    return 2.0 * 2.0 ** (np.arange(n + 1) / rows_per_octave)


def _refine_hexagon(boundary_xy, target):
    """Constrained Delaunay mesh of the hexagon with hyperbolic edge length ~ ``target``.

    Meshing happens in the centred disk, where the triangle's symmetry is a
    rotation; the per-triangle area bound follows the disk's conformal factor.
    """
    P = to_centered_disk(boundary_xy)
    order = np.argsort(np.arctan2(P[:, 1], P[:, 0]), kind="stable")
    P = P[order]
    n = len(P)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    geo = {"vertices": P, "segments": seg}
    out = tr.triangulate(geo, "pYq30")
    for _ in range(6):
        V, F = out["vertices"], out["triangles"]
        c = V[F].mean(axis=1)
        scale = (1 - np.sum(c * c, axis=1)) / 2  # euclidean per unit hyperbolic length
        max_area = (math.sqrt(3) / 4) * (target * scale) ** 2
        a, b = V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]]
        area = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        if np.all(area <= 1.05 * max_area):
            break
        out = tr.triangulate({"vertices": V, "segments": out["segments"], "triangles": F,
                              "triangle_max_area": max_area}, "rpYq30a")
    V = out["vertices"]
    # boundary vertices keep their exact input coordinates
    back = from_centered_disk(V)
    back[:n] = boundary_xy[order]
    return back, out["triangles"], order


def ideal_triangle(h=1.0, y_cut=16.0, n_cols=16, rows_per_octave=None):
    """Truncated domain ``D`` of Example 1 with its Dirichlet data.

    Data: ``h`` on ``a``, 0 on ``b`` and ``c``; on each cusp cut the standard
    end, i.e. the linear interpolation of the side values in cusp coordinates.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    if rows_per_octave is None:
        # square-ish cells at the bottom of each strip
        rows_per_octave = max(2, int(round(math.log(2) * 2 * n_cols)))
    xs = np.linspace(-1.0, 0.0, n_cols + 1)
    ys = _strip_rows(y_cut, rows_per_octave)
    X, Y = np.meshgrid(xs, ys, indexing="ij")  # (cols, rows)
    strip = np.column_stack([X.ravel(), Y.ravel()])
    faces_strip = _crisscross(len(xs), len(ys))

    # side segment on a from the A-cut (0, 2) down to the B-cut (0, 1/2)
    n_side = max(2, int(round(math.log(4.0) / (0.5 / n_cols))))
    side = np.column_stack([np.zeros(n_side - 1), 2.0 * 4.0 ** (-np.arange(1, n_side) / n_side)])

    pts, faces, strips, offset = [], [], {}, 0
    for name, k in (("A", 0), ("B", 1), ("C", 2)):
        P = rho_power(strip, k)
        pts.append(P)
        faces.append(faces_strip + offset)
        grid = (np.arange(len(strip)).reshape(len(xs), len(ys)).T + offset)
        strips[name] = CuspStrip(name, k, xs, ys, grid)
        offset += len(strip)
    side_ids = []
    for k in range(3):
        pts.append(rho_power(side, k))
        side_ids.append(np.arange(offset, offset + len(side)))
        offset += len(side)
    P_all = np.concatenate(pts)

    # hexagon: bottom rows of the strips plus the side segments
    hex_ids = np.concatenate([strips[s].grid[0] for s in "ABC"] + side_ids)
    hv, hf, order = _refine_hexagon(P_all[hex_ids], 0.5 / n_cols)
    nb = len(hex_ids)
    new_pts = hv[nb:]
    idmap = np.concatenate([hex_ids[order], offset + np.arange(len(new_pts))])
    faces.append(idmap[hf])
    P_all = np.concatenate([P_all, new_pts])
    F_all = np.concatenate(faces)
    # orient all faces positively in the chart
    e1 = P_all[F_all[:, 1]] - P_all[F_all[:, 0]]
    e2 = P_all[F_all[:, 2]] - P_all[F_all[:, 0]]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    F_all[neg] = F_all[neg][:, ::-1]

    A, B, C = strips["A"], strips["B"], strips["C"]
    arcs = {
        # rho maps c -> a -> b; column 0 of a strip lies on the pre-image of c
        "a": np.concatenate([A.grid[:, -1], side_ids[0], B.grid[:, 0]]),
        "b": np.concatenate([B.grid[:, -1], side_ids[1], C.grid[:, 0]]),
        "c": np.concatenate([C.grid[:, -1], side_ids[2], A.grid[:, 0]]),
        "cut_A": A.grid[-1], "cut_B": B.grid[-1], "cut_C": C.grid[-1],
    }
    # standard ends at the cuts, written in cusp coordinates x' in [-1, 0]
    data = {
        "a": BoundaryDatum.finite(h), "b": BoundaryDatum.finite(0.0),
        "c": BoundaryDatum.finite(0.0),
        "cut_A": Tabulated(h * (xs + 1.0)),   # c (x'=-1) -> 0, a (x'=0) -> h
        "cut_B": Tabulated(-h * xs),          # a (x'=-1) -> h, b (x'=0) -> 0
        "cut_C": Tabulated(np.zeros_like(xs)),
    }
    prob = GraphProblem(P_all, F_all, arcs, data, HalfPlaneChart(), None,
                        {"domain": "ideal_triangle", "h": h, "y_cap": y_cut})
    return IdealTriangleMesh(prob, strips, h, y_cut,
                             {"n_cols": n_cols, "rows_per_octave": rows_per_octave})


# --------------------------------------------------------------------------
# Example 5: the third quadrant S of the ideal square Q1, with V at infinity
#
# In this chart Q1 = {-1, 0, 1, inf}, the centre O is (0, 1), the disk x-axis
# is the semicircle centred at 1 of radius sqrt 2 and the y-axis the one
# centred at -1.  S is {-1 < x < 1} above the arcs Bm -> O -> L with
# L = (1, sqrt 2) and Bm = (-1, sqrt 2).

SQRT2 = math.sqrt(2.0)


@dataclass
class SectorMesh:
    problem: GraphProblem
    strip: CuspStrip
    center_id: int
    h: float
    y_cut: float
    meta: dict = field(default_factory=dict)


def _graded_steps(a, b, fine, coarse, rate):
    """Arclength stations from ``a`` to ``b``: spacing ``rate * s`` clipped to ``[fine, coarse]``."""
    s = [a]
    while s[-1] < b:
        s.append(s[-1] + min(coarse, max(fine, rate * s[-1])))
    s = np.array(s)
    return a + (s - a) * ((b - a) / (s[-1] - a))


def _arc_from_center(center_x, stations):
    """Points at hyperbolic distance ``stations`` from O = (0, 1) along the
    semicircle centred at ``center_x`` of radius sqrt 2 (moving away from O)."""
    s0 = math.atanh((0.0 - center_x) / SQRT2)
    sign = 1.0 if center_x > 0 else -1.0
    s = s0 + sign * stations
    return np.column_stack([center_x + SQRT2 * np.tanh(s), SQRT2 / np.cosh(s)])


def _from_o_disk(rho, theta):
    """Points of the disk centred at O = (0, 1) (geodesic polar coordinates)."""
    return disk_to_halfplane(np.column_stack([rho * np.cos(theta), rho * np.sin(theta)]))


def quadrant_sector(h=1.0, y_cut=16.0, n_cols=32, rows_per_octave=None, grade=0.25,
                    n_fan=12, r_polar=0.25, fine=None):
    """Truncated ``S`` with data ``h`` on the x-axis arc and the left half-side
    (``x = 1``), 0 on the y-axis arc and the bottom half-side (``x = -1``).

    The jump at O becomes a vertical segment of the surface.  Within distance
    ``r_polar`` of O the mesh is polar (``n_fan`` angular cells, geometric
    rings down to ``fine``), so the twist of the graph around O is resolved;
    elsewhere Triangle meshes at spacing ``grade * dist(., O)`` up to ``1 / n_cols``.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    target = 1.0 / n_cols
    fine = target / 64 if fine is None else fine
    if rows_per_octave is None:
        rows_per_octave = max(2, int(round(math.log(2) * n_cols)))
    xs = np.linspace(-1.0, 1.0, n_cols + 1)
    ys = _strip_rows(y_cut, rows_per_octave)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    strip_pts = np.column_stack([X.ravel(), Y.ravel()])
    strip_faces = _crisscross(len(xs), len(ys))
    grid = np.arange(len(strip_pts)).reshape(len(xs), len(ys)).T
    strip = CuspStrip("V", 0, xs, ys, grid)
    off = len(strip_pts)

    # polar sector at O: the disk rays at 45 and 135 degrees are the two axis arcs
    q = 1.0 + (math.pi / 2) / n_fan
    n_rings = max(2, int(math.ceil(math.log(r_polar / fine) / math.log(q))))
    radii = fine * (r_polar / fine) ** (np.arange(n_rings + 1) / n_rings)
    theta = math.pi / 4 + (math.pi / 2) * np.arange(n_fan + 1) / n_fan
    R, T = np.meshgrid(radii, theta, indexing="ij")
    polar_pts = np.concatenate([[[0.0, 1.0]], _from_o_disk(np.tanh(R.ravel() / 2), T.ravel())])
    pid = off + 1 + np.arange(len(radii) * len(theta)).reshape(len(radii), len(theta))
    ids_O = off
    pf = [[ids_O, pid[0, j], pid[0, j + 1]] for j in range(n_fan)]
    for k in range(n_rings):
        for j in range(n_fan):
            a_, b_, c_, d_ = pid[k, j], pid[k + 1, j], pid[k + 1, j + 1], pid[k, j + 1]
            pf += [[a_, b_, c_], [a_, c_, d_]] if (k + j) % 2 == 0 else [[a_, b_, d_], [b_, c_, d_]]
    polar_faces = np.array(pf, dtype=np.int64)
    off2 = off + len(polar_pts)

    d_ol = math.log(1.0 + SQRT2)  # dist(O, L) = dist(O, Bm)
    st = _graded_steps(r_polar, d_ol, fine, target, grade)
    arc_x = _arc_from_center(1.0, st)    # polar ring -> L
    arc_y = _arc_from_center(-1.0, st)   # polar ring -> Bm
    arc_x[-1] = [1.0, SQRT2]
    arc_y[-1] = [-1.0, SQRT2]
    n_side = max(2, int(math.ceil(math.log(2.0 / SQRT2) / target)))
    side_y = SQRT2 * (2.0 / SQRT2) ** (np.arange(1, n_side) / n_side)  # strictly between

    # loop of the outer region, counter-clockwise: arc to L, side x = 1, strip row
    # y = 2 (x from 1 to -1), side x = -1, arc back from Bm, outer polar ring
    top = grid[0][::-1]
    ring = pid[-1]
    new_a = np.concatenate([arc_x[1:], np.column_stack([np.ones(n_side - 1), side_y])])
    new_b = np.concatenate([np.column_stack([-np.ones(n_side - 1), side_y[::-1]]), arc_y[::-1][:-1]])
    ids_a = off2 + np.arange(len(new_a))
    ids_b = off2 + len(new_a) + np.arange(len(new_b))
    loop_ids = np.concatenate([[ring[0]], ids_a, top, ids_b, ring[::-1][:-1]])
    P_known = np.concatenate([strip_pts, polar_pts, new_a, new_b])
    loop_pts = P_known[loop_ids]
    n_a = len(arc_x) - 1
    ids_ax = np.concatenate([[ids_O], pid[:, 0], ids_a[:n_a]])          # O .. L
    ids_sl = ids_a[n_a:]                                                 # x = 1, ascending
    ids_sb = ids_b[:n_side - 1]                                          # x = -1, descending
    ids_ay = np.concatenate([ids_b[n_side - 1:], pid[::-1, -1], [ids_O]])  # Bm .. O

    V, F = _mesh_graded(loop_pts, target, fine, grade)
    inner = V[len(loop_pts):]
    idmap = np.concatenate([loop_ids, len(P_known) + np.arange(len(inner))])
    P_all = np.concatenate([P_known, inner])
    F_all = np.concatenate([strip_faces, polar_faces, idmap[F]])
    e1 = P_all[F_all[:, 1]] - P_all[F_all[:, 0]]
    e2 = P_all[F_all[:, 2]] - P_all[F_all[:, 0]]
    neg = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0
    F_all[neg] = F_all[neg][:, ::-1]

    arcs = {
        "ax_x": ids_ax,
        "side_l": np.concatenate([[ids_ax[-1]], ids_sl, grid[:, -1]]),
        "side_b": np.concatenate([ids_ay[:1], ids_sb[::-1], grid[:, 0]]),
        "ax_y": ids_ay,
        "cut_V": grid[-1],
    }
    data = {
        "ax_x": BoundaryDatum.finite(h), "side_l": BoundaryDatum.finite(h),
        "ax_y": BoundaryDatum.finite(0.0), "side_b": BoundaryDatum.finite(0.0),
        "cut_V": Tabulated(h * (xs + 1.0) / 2.0),
    }
    prob = GraphProblem(P_all, F_all, arcs, data, HalfPlaneChart(), None,
                        {"domain": "quadrant_sector", "h": h, "y_cap": y_cut})
    return SectorMesh(prob, strip, int(ids_O), h, y_cut,
                      {"n_cols": n_cols, "rows_per_octave": rows_per_octave, "grade": grade,
                       "fine": fine, "n_fan": n_fan, "r_polar": r_polar})


def _mesh_graded(loop_pts, target, fine, grade):
    """Constrained Delaunay mesh of a closed loop; hyperbolic size ``grade * dist(., O)``
    clipped to ``[fine, target]``.  Input vertices come first and are unchanged."""
    n = len(loop_pts)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    out = tr.triangulate({"vertices": loop_pts, "segments": seg}, "pYq28")
    for _ in range(40):
        V, F = out["vertices"], out["triangles"]
        c = V[F].mean(axis=1)
        r = 2.0 * np.arcsinh(np.hypot(c[:, 0], c[:, 1] - 1.0) / (2.0 * np.sqrt(c[:, 1])))
        size = np.clip(grade * r, fine, target)
        max_area = (math.sqrt(3) / 4) * (size * c[:, 1]) ** 2
        a, b = V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]]
        area = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        if np.all(area <= 1.05 * max_area):
            break
        out = tr.triangulate({"vertices": V, "segments": out["segments"], "triangles": F,
                              "triangle_max_area": max_area}, "rpYq28a")
    V = out["vertices"].copy()
    V[:n] = loop_pts
    return V, out["triangles"]
