"""Surface complexes for the five worked examples in ``M x S^1``.

Examples 1 and 2 are pure graph-solver builds plus reflections.  Examples 3 to
5 take Plateau pieces from :mod:`hypermin.plateau`.  Every builder returns an
:class:`ExampleBuild` with the complex, its topology and per-end loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domains import ideal_triangle, quadrant_sector
from .exceptions import DomainError, NumericalError
from .graph_solver import solve
from .hyperbolic import (
    CuspModel, GeodesicReflection, HalfTurn, Isometry, MobiusMap, Parabolic, Semicircle, VerticalLine,
    VerticalTranslate, disk_to_halfplane, geodesic_through, halfplane_to_disk,
)
from .ends import EndType
from .mesh import TriMesh, merge_meshes
from .plateau import PlateauSolver, Polygon
from .reflection import (
    DeckGenerator, Identification, Patch, ReflectionRule, SurfaceComplex, TopologySummary, reflect,
    rotate_image,
)

SIDE_A = VerticalLine(0.0)
SIDE_B = Semicircle(-1.0, 0.0)
SIDE_C = VerticalLine(-1.0)
SIDE_C1 = VerticalLine(1.0)
SIDE_B1 = Semicircle(0.0, 1.0)
IDENTITY = Isometry.identity()


@dataclass
class ExampleBuild:
    id: int
    complex: SurfaceComplex
    topology: TopologySummary
    ends: dict = field(default_factory=dict)  # end name -> {"kind", "tags", "width"}
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    # cut tag -> (grid of patch vertex ids, rows x cols; xs; ys) in the cusp's own coordinates
    strips: dict = field(default_factory=dict, repr=False)
    period: float = 0.0  # vertical period of the quotient

    def quotient(self):
        return self.complex.quotient()

    def end_loop(self, name, mesh=None):
        """Boundary loop of the quotient that contains the end's cut vertices."""
        mesh = self.complex.quotient().mesh if mesh is None else mesh
        ids = np.concatenate([mesh.tags[t] for t in self.ends[name]["tags"]])
        for loop in mesh.boundary_loops():
            if np.isin(ids, loop).all():
                return loop
        raise DomainError(f"no boundary loop carries end {name!r}")

    def end_mesh(self, name) -> "ExampleEnd":
        return unroll_end(self, name)


def _triangle_strips(D):
    return {f"cut_{k}": (st.grid, st.xs, st.ys) for k, st in D.strips.items()}


def _graph_patch(h, y_cut, n_cols, tol):
    D = ideal_triangle(h, y_cut, n_cols)
    sol = solve(D.problem, tol=tol)
    return D, sol, sol.surface_mesh()


def example1(h=1.0, y_cut=16.0, n_cols=16, tol=1e-8) -> ExampleBuild:
    """Graph over ``Q = D u R_a(D)``, glued by ``T(2h) psi_A`` and ``T(2h) psi_B``."""
    D, sol, S = _graph_patch(h, y_cut, n_cols, tol)
    ra = ReflectionRule.across(SIDE_A, h)
    rc1 = ReflectionRule.across(SIDE_C1, 2 * h)
    rb1 = ReflectionRule.across(SIDE_B1, 2 * h)
    psi_a = Isometry((Parabolic(2.0), VerticalTranslate(2 * h)))
    psi_b = Isometry((MobiusMap(((1.0, 0.0), (2.0, 1.0))), VerticalTranslate(2 * h)))
    patches = [Patch("D", S, ("graph",)), Patch("RaD", reflect(S, ra, fixed_tag="a"), ("R_a",))]
    idents = [
        Identification("D", "a", "RaD", "a", IDENTITY, "a"),
        Identification("D", "c", "RaD", "c", psi_a, "c ~ c1"),
        Identification("D", "b", "RaD", "b", psi_b, "b ~ b1"),
    ]
    deck = [DeckGenerator("T(2h) psi_A", psi_a, "D", (ra, rc1)),
            DeckGenerator("T(2h) psi_B", psi_b, "D", (ra, rb1))]
    cx = SurfaceComplex(patches, idents, deck, {"example": 1, "quotient": "T(2h)"})
    ends = {
        "A": {"kind": "helicoidal", "tags": ["D:cut_A", "RaD:cut_A"], "width": 2.0, "type": (1, 1)},
        "B": {"kind": "helicoidal", "tags": ["D:cut_B", "RaD:cut_B"], "width": 2.0, "type": (1, 1)},
        "C": {"kind": "horizontal", "tags": ["D:cut_C", "RaD:cut_C"], "width": 2.0, "type": (1, 0)},
    }
    return ExampleBuild(1, cx, cx.topology(), ends,
                        {"h": h, "y_cut": y_cut, "n_cols": n_cols},
                        {"residual": sol.residual, "newton_iterations": sol.iterations},
                        _triangle_strips(D), 2 * h)


def example2(h=1.0, y_cut=16.0, n_cols=16, tol=1e-8) -> ExampleBuild:
    """Graph over ``F = Q u R_c1(Q)`` in the quotient by ``T(4h)``."""
    D, sol, S = _graph_patch(h, y_cut, n_cols, tol)
    ra = ReflectionRule.across(SIDE_A, h)
    rc1 = ReflectionRule.across(SIDE_C1, 2 * h)
    rb = ReflectionRule.across(SIDE_B, 0.0)
    rb1 = ReflectionRule.across(SIDE_B1, 2 * h)
    RaS = reflect(S, ra, fixed_tag="a")
    patches = [
        Patch("D", S, ("graph",)),
        Patch("RaD", RaS, ("R_a",)),
        Patch("Rc1D", rotate_image(S, rc1), ("R_c1",)),
        Patch("Rc1RaD", reflect(RaS, rc1, fixed_tag="c"), ("R_a", "R_c1")),
    ]
    g1 = Isometry((Parabolic(4.0), VerticalTranslate(4 * h)))
    # hyperbolic: the unique orientation-preserving map R_c1 R_b, matching endpoints (-1, 0) -> (3, 2)
    g2 = Isometry((GeodesicReflection(SIDE_B), GeodesicReflection(SIDE_C1), VerticalTranslate(4 * h)))
    # parabolic at C1 = 1
    g3 = Isometry((GeodesicReflection(SIDE_B1), GeodesicReflection(SIDE_C1)))
    idents = [
        Identification("D", "a", "RaD", "a", IDENTITY, "a"),
        Identification("RaD", "c", "Rc1RaD", "c", IDENTITY, "c1"),
        Identification("Rc1D", "a", "Rc1RaD", "a", IDENTITY, "R_c1(a)"),
        Identification("D", "c", "Rc1D", "c", g1, "c ~ R_c1(c)"),
        Identification("D", "b", "Rc1D", "b", g2, "b ~ R_c1(b)"),
        Identification("RaD", "b", "Rc1RaD", "b", g3, "b1 ~ R_c1(b1)"),
    ]
    deck = [DeckGenerator("T(4h) parabolic at A", g1, "D", (ra, rc1, ra, rc1)),
            DeckGenerator("T(4h) R_c1 R_b", g2, "D", (rb, rc1)),
            DeckGenerator("R_c1 R_b1", g3, "RaD", (rb1, rc1))]
    # the deck chain for g1 needs R_a and R_c1 applied twice: R_c1 R_a R_c1 R_a = T(4h) psi(4)
    cx = SurfaceComplex(patches, idents, deck, {"example": 2, "quotient": "T(4h)"})
    ends = {
        "A": {"kind": "helicoidal", "tags": ["D:cut_A", "RaD:cut_A", "Rc1D:cut_A", "Rc1RaD:cut_A"],
              "width": 4.0, "type": (1, 1)},
        "B": {"kind": "helicoidal", "tags": ["D:cut_B", "RaD:cut_B", "Rc1D:cut_B", "Rc1RaD:cut_B"],
              "width": 4.0, "type": (1, 1)},
        "C": {"kind": "horizontal", "tags": ["D:cut_C", "Rc1D:cut_C"], "width": 2.0, "type": (1, 0)},
        "C1": {"kind": "horizontal", "tags": ["RaD:cut_C", "Rc1RaD:cut_C"], "width": 2.0,
               "type": (1, 0)},
    }
    return ExampleBuild(2, cx, cx.topology(), ends,
                        {"h": h, "y_cut": y_cut, "n_cols": n_cols},
                        {"residual": sol.residual, "newton_iterations": sol.iterations},
                        _triangle_strips(D), 4 * h)


# --------------------------------------------------------------------------
# Examples 3 and 4: Scherk pieces from one Plateau hexagon
#
# Both live in the chart where the ideal square Q is {-1, 0, 1, inf} and the
# centre O of Q is (0, 1).  The Plateau piece D1 spans the hexagon
#   O_h -> A_h -> A_0 -> O_0 -> B_0 -> B_h -> O_h
# with A on gamma_1 and B on gamma_2, two perpendicular geodesics through O
# placed symmetrically about x = 0 (the hexagon is then invariant under
# (x, y, t) -> (-x, y, h - t), a linear map of the chart).

HEX_EDGES = ("alpha_h", "vert_A", "alpha_0", "beta_0", "vert_B", "beta_h")
CENTER = (0.0, 1.0)


def _disk_point(r, angle):
    return disk_to_halfplane(np.array([r * math.cos(angle), r * math.sin(angle)]))


def _hexagon(A, B, h):
    O = np.array(CENTER)
    return Polygon(np.array([[*O, h], [*A, h], [*A, 0.0], [*O, 0.0], [*B, 0.0], [*B, h]]),
                   names=list(HEX_EDGES))


def scherk_hexagon(h=1.0, r=math.sqrt(2.0) - 1.0) -> Polygon:
    """The Scherk contour with ``A``, ``B`` at disk radius ``r`` on the two diagonals."""
    if not 0.0 < r < 1.0:
        raise DomainError("r must lie in (0, 1)")
    return _hexagon(_disk_point(r, -math.pi / 4), _disk_point(r, -3 * math.pi / 4), h)


def _plateau_piece(poly, target, tol):
    solver = PlateauSolver(target=target, tol=tol)
    try:
        solver.fit(poly)
        return solver.result_, None
    except NumericalError as exc:
        res = getattr(solver, "result_", None)
        if res is None:
            raise
        return res, f"{exc}"


def _scherk_patches(D1, g1, g2, h):
    """E = D1 over [0, h]; N, S over [h, 2h]; W = half-turn of E over [0, h]."""
    r1 = ReflectionRule.across(g1, h)
    r2 = ReflectionRule.across(g2, h)
    N = reflect(D1, r1, fixed_tag="alpha_h")
    S = reflect(D1, r2, fixed_tag="beta_h")
    W = reflect(N, r2, fixed_tag="beta_h")
    return [Patch("E", D1, ("plateau",), graph=False),
            Patch("N", N, ("R_gamma1,h",), graph=False),
            Patch("S", S, ("R_gamma2,h",), graph=False),
            Patch("W", W, ("R_gamma1,h", "R_gamma2,h"), graph=False)], r1, r2


def _horizontal_idents(h):
    T2 = Isometry((VerticalTranslate(2 * h),))
    return [
        Identification("E", "alpha_h", "N", "alpha_h", IDENTITY, "alpha x h"),
        Identification("E", "beta_h", "S", "beta_h", IDENTITY, "beta x h"),
        Identification("N", "beta_h", "W", "beta_h", IDENTITY, "beta' x h"),
        Identification("S", "alpha_h", "W", "alpha_h", IDENTITY, "alpha' x h"),
        Identification("E", "alpha_0", "N", "alpha_0", T2, "alpha x 0 ~ alpha x 2h"),
        Identification("E", "beta_0", "S", "beta_0", T2, "beta x 0 ~ beta x 2h"),
        Identification("W", "alpha_0", "S", "alpha_0", T2, "alpha' x 0 ~ alpha' x 2h"),
        Identification("W", "beta_0", "N", "beta_0", T2, "beta' x 0 ~ beta' x 2h"),
    ]


def _inside_ideal_polygon(xy, angles, tol=1e-12):
    """Whether half-plane points lie in the ideal polygon with disk vertex angles
    ``angles`` (counter-clockwise).  Uses the Klein model, where it is convex."""
    p = halfplane_to_disk(np.asarray(xy, dtype=float))
    k = 2 * p / (1 + np.sum(p * p, axis=1))[:, None]
    V = np.column_stack([np.cos(angles), np.sin(angles)])
    inside = np.ones(len(k), dtype=bool)
    for a, b in zip(V, np.roll(V, -1, axis=0)):
        e, w = b - a, k - a
        inside &= e[0] * w[:, 1] - e[1] * w[:, 0] >= -tol
    return inside


def example3(h=1.0, target=0.12, tol=1e-4) -> ExampleBuild:
    """Compact Scherk surface in ``M x R/T(2h)``, ``M`` the once punctured torus from Q."""
    r0 = math.sqrt(2.0) - 1.0  # side midpoints of the ideal square sit at this disk radius
    A, B = _disk_point(r0, -math.pi / 4), _disk_point(r0, -3 * math.pi / 4)
    g1, g2 = geodesic_through(CENTER, A), geodesic_through(CENTER, B)
    res, err = _plateau_piece(_hexagon(A, B, h), target, tol)
    patches, r1, r2 = _scherk_patches(res.mesh, g1, g2, h)
    # translations along gamma_1 / gamma_2 pair opposite sides of Q
    t1 = Isometry((HalfTurn(CENTER), HalfTurn(tuple(A))))
    t2 = Isometry((HalfTurn(CENTER), HalfTurn(tuple(B))))
    idents = _horizontal_idents(h) + [
        Identification("W", "vert_A", "E", "vert_A", t1, "T(gamma1) on [0, h]"),
        Identification("S", "vert_A", "N", "vert_A", t1, "T(gamma1) on [h, 2h]"),
        Identification("W", "vert_B", "E", "vert_B", t2, "T(gamma2) on [0, h]"),
        Identification("N", "vert_B", "S", "vert_B", t2, "T(gamma2) on [h, 2h]"),
    ]
    deck = [
        DeckGenerator("T(2h)", Isometry((VerticalTranslate(2 * h),)), "E",
                      (ReflectionRule.across(g1, 0.0), r1)),
        DeckGenerator("T(gamma1)", t1, "W", (r1, r2, ReflectionRule.about_axis(A, (0.0, h)))),
        DeckGenerator("T(gamma2)", t2, "W", (r1, r2, ReflectionRule.about_axis(B, (0.0, h)))),
    ]
    cx = SurfaceComplex(patches, idents, deck, {"example": 3, "quotient": "T(2h)"})
    diag = {"plateau": res.report(), "translation_length": 2 * math.log(1 + math.sqrt(2))}
    if err:
        diag["plateau_error"] = err
    return ExampleBuild(3, cx, cx.topology(), {}, {"h": h, "target": target}, diag, period=2 * h)


def example4(h=1.0, r_cut=0.9, target=0.12, tol=1e-4) -> ExampleBuild:
    """Scherk surface with four vertical annular ends; rays toward the ideal
    vertices of Q are truncated at disk radius ``r_cut``."""
    if not 0.0 < r_cut < 1.0:
        raise DomainError("r_cut must lie in (0, 1)")
    A, B = _disk_point(r_cut, -math.pi / 4), _disk_point(r_cut, -3 * math.pi / 4)
    g1, g2 = geodesic_through(CENTER, A), geodesic_through(CENTER, B)
    res, err = _plateau_piece(_hexagon(A, B, h), target, tol)
    patches, r1, r2 = _scherk_patches(res.mesh, g1, g2, h)
    deck = [DeckGenerator("T(2h)", Isometry((VerticalTranslate(2 * h),)), "E",
                          (ReflectionRule.across(g1, 0.0), r1))]
    cx = SurfaceComplex(patches, _horizontal_idents(h), deck, {"example": 4, "quotient": "T(2h)"})
    ends = {
        "A": {"kind": "vertical", "tags": ["E:vert_A", "N:vert_A"], "width": 2 * h, "type": (0, 1)},
        "B": {"kind": "vertical", "tags": ["E:vert_B", "S:vert_B"], "width": 2 * h, "type": (0, 1)},
        "-A": {"kind": "vertical", "tags": ["W:vert_A", "S:vert_A"], "width": 2 * h, "type": (0, 1)},
        "-B": {"kind": "vertical", "tags": ["W:vert_B", "N:vert_B"], "width": 2 * h, "type": (0, 1)},
    }
    # Q has its ideal vertices on the rays: disk angles +-pi/4, +-3pi/4
    angles = np.array([-3, -1, 1, 3]) * math.pi / 4
    inside = all(bool(_inside_ideal_polygon(p.mesh.vertices[:, :2], angles).all()) for p in patches)
    diag = {"plateau": res.report(), "inside_Q": inside}
    if err:
        diag["plateau_error"] = err
    return ExampleBuild(4, cx, cx.topology(), ends, {"h": h, "r_cut": r_cut, "target": target}, diag,
                        period=2 * h)


# --------------------------------------------------------------------------
# Example 5: helicoid with helicoidal ends, built from a graph over S
#
# Chart: V at infinity, Q1 = {-1, 0, 1, inf}, O = (0, 1).  Sides of Q1: left
# x = 1, bottom x = -1, right Semicircle(-1, 0), top Semicircle(0, 1).  Disk
# axes: x-axis Semicircle(1 - sqrt 2, 1 + sqrt 2), y-axis Semicircle(-1 - sqrt 2,
# -1 + sqrt 2).

X_AXIS = Semicircle(1.0 - math.sqrt(2.0), 1.0 + math.sqrt(2.0))
Y_AXIS = Semicircle(-1.0 - math.sqrt(2.0), -1.0 + math.sqrt(2.0))
SIDE_LEFT, SIDE_BOTTOM = VerticalLine(1.0), VerticalLine(-1.0)
SIDE_RIGHT, SIDE_TOP = Semicircle(-1.0, 0.0), Semicircle(0.0, 1.0)
# pairings of opposite sides: translations along the disk axes
T_X = Isometry((GeodesicReflection(Y_AXIS), GeodesicReflection(SIDE_RIGHT)))  # left -> right
T_Y = Isometry((GeodesicReflection(X_AXIS), GeodesicReflection(SIDE_TOP)))    # bottom -> top


def ruled_axis_patch(points, u, faces, center_id, tags):
    """Graph mesh with the fan at ``center_id`` replaced by a strip of
    horizontal rulings ending on the vertical segment over that vertex.

    The data jump at the centre makes the closure of the graph contain the
    segment ``{O} x [min u, max u]`` over the ring.  Each ring vertex ``v``
    gets an axis vertex ``(O, u(v))``; each fan triangle becomes two.
    """
    faces = np.asarray(faces, dtype=np.int64)
    n = len(points)
    V = np.column_stack([points, u])
    fan = np.any(faces == center_id, axis=1)
    ring = np.unique(faces[fan])
    ring = ring[ring != center_id]
    heights = np.unique(np.round(u[ring], 14))
    axis_ids = n + np.arange(len(heights))
    axis_of = {int(v): int(axis_ids[np.searchsorted(heights, np.round(u[v], 14))]) for v in ring}
    new = []
    for f in faces[fan]:
        k = int(np.flatnonzero(f == center_id)[0])
        p, q = int(f[(k + 1) % 3]), int(f[(k + 2) % 3])
        ap, aq = axis_of[p], axis_of[q]
        new.append([ap, p, q])
        if ap != aq:
            new.append([ap, q, aq])
    O = points[center_id]
    V = np.concatenate([V, np.column_stack([np.repeat(O[None], len(heights), 0), heights])])
    F = np.concatenate([faces[~fan], np.array(new, dtype=np.int64)])
    # drop the centre vertex and renumber
    keep = np.ones(len(V), dtype=bool)
    keep[center_id] = False
    remap = np.cumsum(keep) - 1
    out_tags = {}
    for name, ids in tags.items():
        ids = np.asarray(ids)
        if center_id in ids:
            # the centre splits: the arc keeps the axis vertex at its own height
            level = float(np.median(u[ids[ids != center_id]]))
            end = axis_ids[int(np.argmin(np.abs(heights - level)))]
            ids = np.array([end if i == center_id else i for i in ids])
        out_tags[name] = remap[ids]
    out_tags["axis_O"] = remap[axis_ids]
    return TriMesh(V[keep], remap[F], out_tags)


def _shifted(iso, dt):
    return Isometry(tuple(iso.steps) + ((VerticalTranslate(dt),) if dt else ()))


def _example5_complex(S1, h, period):
    """Patches and identifications of the ``T(period)`` quotient, ``period`` in {2h, 4h}."""
    O = CENTER
    rx = ReflectionRule.across(X_AXIS, h)
    S3 = reflect(S1, rx, fixed_tag="ax_x")
    S2 = reflect(S1, ReflectionRule.about_axis(O, (0.0, h)), fixed_tag="axis_O")
    S4 = reflect(S3, ReflectionRule.about_axis(O, (h, 2 * h)), fixed_tag="axis_O")
    base = [Patch("S1", S1, ("graph", "ruled axis"), graph=False),
            Patch("S2", S2, ("H_O",), graph=False),
            Patch("S3", S3, ("R_x,h",), graph=False),
            Patch("S4", S4, ("R_x,h", "H_O"), graph=False)]
    double = abs(period - 4 * h) < 1e-12
    patches = list(base)
    if double:
        up = Isometry((VerticalTranslate(2 * h),))
        patches += [Patch(p.name + "'", p.mesh.transformed(up), p.provenance + ("T(2h)",), graph=False)
                    for p in base]
    # names of the copy over [2h, 4h] (the same patch when the period is 2h)
    up_name = (lambda s: s + "'") if double else (lambda s: s)
    wrap = period  # a shift across the top of the period
    bands = [("", 0.0)] + ([("'", 2 * h)] if double else [])
    # in the double cover the side pairings carry a shift of 2h: T_x and T_y alone
    # reverse the orientation of the surface (the axis at O is a Schwarz line)
    sx = 2 * h if double else 0.0
    idents = []
    for suf, dt in bands:
        idents += [
            Identification("S1" + suf, "ax_x", "S3" + suf, "ax_x", IDENTITY, "x-axis at h"),
            Identification("S2" + suf, "ax_x", "S4" + suf, "ax_x", IDENTITY, "x-axis at h"),
            Identification("S1" + suf, "axis_O", "S2" + suf, "axis_O", IDENTITY, "axis at O"),
            Identification("S3" + suf, "axis_O", "S4" + suf, "axis_O", IDENTITY, "axis at O"),
        ]
    if double:
        idents += [
            Identification("S1", "side_l", "S4'", "side_l", _shifted(T_X, sx), "left ~ right"),
            Identification("S3", "side_l", "S2'", "side_l", _shifted(T_X, sx), "left ~ right"),
            Identification("S1'", "side_l", "S4", "side_l", _shifted(T_X, -sx), "left ~ right"),
            Identification("S3'", "side_l", "S2", "side_l", _shifted(T_X, -sx), "left ~ right"),
            Identification("S1", "side_b", "S3", "side_b", _shifted(T_Y, 2 * h), "bottom ~ top"),
            Identification("S4", "side_b", "S2", "side_b", _shifted(T_Y, -2 * h), "bottom ~ top"),
            Identification("S1'", "side_b", "S3'", "side_b", _shifted(T_Y, 2 * h), "bottom ~ top"),
            Identification("S4'", "side_b", "S2'", "side_b", _shifted(T_Y, -2 * h), "bottom ~ top"),
            Identification("S3", "ax_y", "S2'", "ax_y", IDENTITY, "y-axis at 2h"),
            Identification("S2", "ax_y", "S3'", "ax_y", _shifted(IDENTITY, wrap), "y-axis at 0 ~ 4h"),
            Identification("S4", "ax_y", "S1'", "ax_y", IDENTITY, "y-axis at 2h"),
            Identification("S1", "ax_y", "S4'", "ax_y", _shifted(IDENTITY, wrap), "y-axis at 0 ~ 4h"),
        ]
    else:
        idents += [
            Identification("S1", "side_l", "S4", "side_l", T_X, "left ~ right"),
            Identification("S3", "side_l", "S2", "side_l", T_X, "left ~ right"),
            Identification("S2", "ax_y", "S3", "ax_y", _shifted(IDENTITY, 2 * h), "y-axis at 0 ~ 2h"),
            Identification("S1", "ax_y", "S4", "ax_y", _shifted(IDENTITY, 2 * h), "y-axis at 0 ~ 2h"),
            Identification("S1", "side_b", "S3", "side_b", _shifted(T_Y, 2 * h), "bottom ~ top"),
            Identification("S4", "side_b", "S2", "side_b", _shifted(T_Y, -2 * h), "bottom ~ top"),
        ]
    hO = ReflectionRule.about_axis(O, (0.0, 2 * h))
    ry0, ry2 = ReflectionRule.across(Y_AXIS, 0.0), ReflectionRule.across(Y_AXIS, 2 * h)
    rr, rt = ReflectionRule.across(SIDE_RIGHT, h), ReflectionRule.across(SIDE_TOP, 2 * h)
    if double:
        deck = [
            DeckGenerator("T(2h) T_x", _shifted(T_X, 2 * h), "S1", (ry0, rr)),
            DeckGenerator("T(2h) T_y", _shifted(T_Y, 2 * h), "S1", (rx, rt)),
            DeckGenerator("T(4h)", Isometry((VerticalTranslate(4 * h),)), "S1", (ry0, ry2)),
        ]
    else:
        deck = [
            DeckGenerator("T_x", T_X, "S1", (hO, rx, rr)),
            DeckGenerator("T_y", T_Y, "S1", (hO, rx, ry0, rx, rt)),
            DeckGenerator("T(2h)", Isometry((VerticalTranslate(2 * h),)), "S1", (ry0, rx, hO)),
        ]
    label = "T(4h)" if double else "T(2h)"
    return SurfaceComplex(patches, idents, deck, {"example": 5, "quotient": label})


EXAMPLE5_DATA = {"ax_x": "h", "side_l": "h", "ax_y": "0", "side_b": "0"}


def example5(h=1.0, y_cut=16.0, n_cols=32, tol=1e-8) -> ExampleBuild:
    """Orientable ``T(4h)`` quotient (8 patches); the ``T(2h)`` quotient is
    reported topologically in ``diagnostics``.

    Boundary data of the graph over S are an assumption (the figure that fixes
    them is not legible): ``h`` on the x-axis arc and the left half-side, 0 on
    the y-axis arc and the bottom half-side.  This puts a vertical segment of
    the surface over O and a helicoidal end at V.
    """
    D = quadrant_sector(h, y_cut, n_cols)
    P = D.problem
    sol = solve(P, tol=tol)
    S1 = ruled_axis_patch(P.points, sol.u, P.faces, D.center_id, P.arcs)
    cx = _example5_complex(S1, h, 4 * h)
    cx2 = _example5_complex(S1, h, 2 * h)
    from .curvature import smooth_total_curvature

    mask = ~np.any(P.faces == D.center_id, axis=1)
    k1 = smooth_total_curvature(P.points, sol.u, P.faces, mask)[0]
    q = cx.quotient().mesh
    ends = {}
    cut_tags = [f"{p.name}:cut_V" for p in cx.patches]
    for i, loop in enumerate(q.boundary_loops()):
        tags = [t for t in cut_tags if np.isin(q.tags[t], loop).all()]
        # each patch contributes a cusp strip of width 2 in its own chart
        ends[f"V{i + 1}"] = {"kind": "helicoidal", "tags": tags, "width": 2.0 * len(tags),
                             "type": None}
    diag = {
        "residual": sol.residual, "newton_iterations": sol.iterations,
        "smooth_total_S1": k1, "smooth_total": 8 * k1,
        "axis_fan_excluded_faces": int((~mask).sum()),
        "quotient_T2h": cx2.topology().to_dict(),
        "assumed_data": dict(EXAMPLE5_DATA),
    }
    st = D.strip  # strip ids precede the centre, so the axis patch keeps them
    return ExampleBuild(5, cx, cx.topology(q), ends,
                        {"h": h, "y_cut": y_cut, "n_cols": n_cols}, diag,
                        {"cut_V": (st.grid, st.xs, st.ys)}, 4 * h)


# --------------------------------------------------------------------------
# ends unrolled into the cusp's own chart


@dataclass
class ExampleEnd:
    """One end as a strip ``{y >= y0}`` over a full period in cusp coordinates.

    ``mesh.tags["cut"]`` is the bottom row ordered by ``x``; ``rows[v]`` is the
    strip row of vertex ``v``.  The model has ``tau`` equal to the ``x``
    period of the loop and ``h`` equal to the quotient's vertical period.
    """

    name: str
    mesh: TriMesh
    model: CuspModel
    kind: EndType
    rows: np.ndarray
    ys: np.ndarray

    def above(self, k):
        """The sub-end on rows ``>= k``, with its cut at row ``k``."""
        if not 0 <= k < len(self.ys) - 1:
            raise DomainError("row index out of range")
        keep = np.all(self.rows[self.mesh.faces] >= k, axis=1)
        sub, old = self.mesh.submesh(keep)
        bottom = np.flatnonzero(self.rows[old] == k)
        sub.tags = {"cut": bottom[np.argsort(sub.vertices[bottom, 0], kind="stable")]}
        model = CuspModel(self.model.tau, self.model.h, float(self.ys[k]), self.model.ambient)
        return ExampleEnd(self.name, sub, model, self.kind, self.rows[old], self.ys)


def _mobius_from_points(z, w):
    """The Mobius map sending three points ``z`` to ``w`` (as a 2x2 matrix)."""
    def to_std(a, b, c):  # a -> 0, b -> 1, c -> inf
        return np.array([[b - c, -a * (b - c)], [b - a, -c * (b - a)]], dtype=complex)
    return np.linalg.inv(to_std(*w)) @ to_std(*z)


def _cusp_map(zs, ws):
    """Isometry of ``H^2`` (possibly orientation reversing) with ``zs -> ws``.

    Returns a callable on complex arrays.
    """
    pick = [0, len(zs) // 2, len(zs) - 1]
    for conj in (False, True):
        zz = np.conj(zs) if conj else zs
        M = _mobius_from_points(zz[pick], ws[pick])

        def f(z, M=M, conj=conj):
            z = np.conj(z) if conj else z
            return (M[0, 0] * z + M[0, 1]) / (M[1, 0] * z + M[1, 1])
        if np.max(np.abs(f(zs) - ws)) <= 1e-8 * max(1.0, np.abs(ws).max()):
            return f
    raise NumericalError("strip is not an isometric copy of its cusp chart")


def unroll_end(build: ExampleBuild, name) -> ExampleEnd:
    """Glue the strip pieces of an end along the quotient's identifications
    (a spanning tree) and express the result in the first piece's cusp chart."""
    if name not in build.ends:
        raise DomainError(f"example {build.id} has no end {name!r}")
    pieces = [tag.split(":", 1) for tag in build.ends[name]["tags"]]
    if not pieces or any(cut not in build.strips for _, cut in pieces):
        raise DomainError(f"end {name!r} of example {build.id} is not meshed past its cut")
    patches = {p.name: p.mesh for p in build.complex.patches}
    grid_of = {pn: build.strips[cut][0] for pn, cut in pieces}
    if len(grid_of) != len(pieces):
        raise DomainError("an end may take at most one strip per patch")
    place = {pieces[0][0]: IDENTITY}
    while len(place) < len(pieces):
        grown = False
        for idn in build.complex.identifications:
            a, b = idn.source, idn.target
            if a not in grid_of or b not in grid_of or (a in place) == (b in place):
                continue
            if not (np.isin(patches[a].tags[idn.source_arc], grid_of[a]).any()
                    and np.isin(patches[b].tags[idn.target_arc], grid_of[b]).any()):
                continue
            if a in place:  # pull the target arc back onto the source arc
                place[b] = Isometry(tuple(idn.iso.inverse().steps) + tuple(place[a].steps))
            else:
                place[a] = Isometry(tuple(idn.iso.steps) + tuple(place[b].steps))
            grown = True
        if not grown:
            raise DomainError(f"pieces of end {name!r} are not connected through identifications")
    first, cut0 = pieces[0]
    grid0, xs, ys = build.strips[cut0]
    src = patches[first].vertices[grid0.ravel()]
    X, Y = np.meshgrid(xs, ys)
    f = _cusp_map(src[:, 0] + 1j * src[:, 1], (X + 1j * Y).ravel())
    meshes, rows = [], []
    for pn, _ in pieces:
        grid = grid_of[pn]
        m = patches[pn].transformed(place[pn])
        keep = np.all(np.isin(m.faces, grid), axis=1)
        sub, old = m.submesh(keep)
        z = f(sub.vertices[:, 0] + 1j * sub.vertices[:, 1])
        sub.vertices = np.column_stack([z.real, z.imag, sub.vertices[:, 2]])
        sub.tags = {}
        row = np.full(patches[pn].n_vertices, -1)
        row[grid] = np.arange(len(ys))[:, None]
        meshes.append(sub)
        rows.append(row[old])
    merged, inverse = merge_meshes(meshes, tol=1e-9)
    row = np.empty(merged.n_vertices, dtype=np.int64)
    row[inverse] = np.concatenate(rows)
    bottom = np.flatnonzero(row == 0)
    merged.tags = {"cut": bottom[np.argsort(merged.vertices[bottom, 0], kind="stable")]}
    cut = merged.vertices[merged.tags["cut"]]
    dx, dt = cut[-1, 0] - cut[0, 0], cut[-1, 2] - cut[0, 2]
    model = CuspModel(float(dx), float(build.period), float(ys[0]))
    kind = EndType(1, int(round(dt / build.period)))
    return ExampleEnd(name, merged, model, kind, row, np.asarray(ys))


def build_example(example_id, **params) -> ExampleBuild:
    builders = {1: example1, 2: example2, 3: example3, 4: example4, 5: example5}
    if example_id not in builders:
        raise DomainError(f"unknown example {example_id!r}; choose 1 to 5")
    return builders[example_id](**params)
