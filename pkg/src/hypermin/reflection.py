"""Schwarz reflection and surface complexes glued by ambient isometries.

A :class:`SurfaceComplex` is a list of patches (meshes in the ``(x, y, t)``
chart) plus identifications ``arc -> arc`` realised by isometries of
``H^2 x R``.  The quotient mesh keeps each face's lifted corners, so metric
quantities on the quotient stay honest while the combinatorics is that of the
identified surface.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial import cKDTree

from .exceptions import DomainError
from .hyperbolic import (
    GeodesicReflection, HalfTurn, HeightReflection, Isometry, VerticalLine, Semicircle,
    dist_product,
)
from .mesh import TriMesh


@dataclass(frozen=True)
class ReflectionRule:
    """Rotation by pi about a line contained in the surface.

    ``kind="geodesic"``: the horizontal geodesic ``geodesic x {height}``,
    ``(p, t) -> (R_gamma p, 2 height - t)``.
    ``kind="vertical"``: the vertical segment over ``center`` with ``t`` in
    ``t_range``, ``(p, t) -> (H_center p, t)``.
    """

    kind: str
    geodesic: object = None
    height: float = 0.0
    center: tuple = None
    t_range: tuple = None

    @classmethod
    def across(cls, geodesic, height):
        return cls("geodesic", geodesic=geodesic, height=float(height))

    @classmethod
    def about_axis(cls, center, t_range):
        return cls("vertical", center=tuple(map(float, center)), t_range=tuple(map(float, t_range)))

    def __post_init__(self):
        if self.kind == "geodesic" and self.geodesic is None:
            raise DomainError("geodesic rule needs a geodesic")
        if self.kind == "vertical" and (self.center is None or self.t_range is None):
            raise DomainError("axis rule needs a center and a height range")
        if self.kind not in ("geodesic", "vertical"):
            raise DomainError(f"unknown reflection kind {self.kind!r}")

    @property
    def isometry(self) -> Isometry:
        if self.kind == "geodesic":
            return Isometry((GeodesicReflection(self.geodesic), HeightReflection(self.height)))
        return Isometry((HalfTurn(self.center),))

    def apply(self, pts):
        return self.isometry.apply(pts)

    def fixed_residual(self, pts):
        """Chart distance of points from the fixed line (0 on it)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        if self.kind == "geodesic":
            return np.maximum(self.geodesic.residual(pts[:, :2]), np.abs(pts[:, 2] - self.height))
        cx, cy = self.center
        r = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        lo, hi = self.t_range
        out = np.maximum(pts[:, 2] - hi, lo - pts[:, 2])
        return np.maximum(r, np.maximum(out, 0.0))

    def describe(self):
        if self.kind == "geodesic":
            return {"kind": "geodesic", "geodesic": _describe_geodesic(self.geodesic),
                    "height": self.height}
        return {"kind": "vertical", "center": list(self.center), "t_range": list(self.t_range)}


def _describe_geodesic(g):
    if isinstance(g, VerticalLine):
        return {"type": "vertical_line", "x": g.x}
    return {"type": "semicircle", "a": g.a, "b": g.b}


def describe_isometry(iso: Isometry):
    out = []
    for g in iso.steps:
        d = {"type": type(g).__name__}
        for f in dataclasses.fields(g):
            v = getattr(g, f.name)
            if isinstance(v, (VerticalLine, Semicircle)):
                v = _describe_geodesic(v)
            elif isinstance(v, tuple):
                v = [list(r) if isinstance(r, tuple) else r for r in v]
            d[f.name] = v
        out.append(d)
    return out


def reflect(patch: TriMesh, rule: ReflectionRule, tol=1e-9, fixed_tag=None) -> TriMesh:
    """Image of ``patch`` under the rotation, faces flipped for a coherent union.

    The fixed line must meet the patch in boundary vertices only: at least two
    boundary vertices lie on it, and no interior vertex does.
    """
    V = patch.vertices
    res = rule.fixed_residual(V)
    scale = tol * max(1.0, float(np.abs(V).max()))
    on = res <= scale
    bnd = np.zeros(patch.n_vertices, dtype=bool)
    bnd[patch.boundary_vertices()] = True
    if fixed_tag is not None:
        ids = patch.tags[fixed_tag]
        if np.any(res[ids] > scale):
            raise DomainError(f"arc {fixed_tag!r} is not fixed by the reflection")
    if np.count_nonzero(on & bnd) < 2 or np.any(on & ~bnd):
        raise DomainError("fixed set of the reflection is not on the patch boundary")
    out = patch.transformed(rule.isometry, flip=True)
    # vertices on the fixed line map to themselves; keep them bit-identical
    out.vertices[on] = V[on]
    return out


def rotate_image(patch: TriMesh, rule: ReflectionRule) -> TriMesh:
    """Image under the rotation without the adjacency requirement of :func:`reflect`."""
    return patch.transformed(rule.isometry, flip=True)


# --------------------------------------------------------------------------
# complexes


@dataclass
class Patch:
    name: str
    mesh: TriMesh
    provenance: tuple = ()
    graph: bool = True  # vertices are (x, y, u(x, y)) over a half-plane domain


@dataclass(frozen=True)
class Identification:
    """``iso`` maps arc ``source_arc`` of ``source`` onto ``target_arc`` of ``target``."""

    source: str
    source_arc: str
    target: str
    target_arc: str
    iso: Isometry
    label: str = ""

    def to_dict(self):
        return {"source": f"{self.source}:{self.source_arc}",
                "target": f"{self.target}:{self.target_arc}",
                "label": self.label, "isometry": describe_isometry(self.iso)}


@dataclass(frozen=True)
class DeckGenerator:
    """Deck generator checked against an independent reflection chain.

    ``iso`` applied to ``patch`` must reproduce the image of ``patch`` under
    the successive rules in ``chain`` (a sample of the extended surface).
    """

    label: str
    iso: Isometry
    patch: str
    chain: tuple

    def to_dict(self):
        return {"label": self.label, "isometry": describe_isometry(self.iso), "patch": self.patch,
                "chain": [r.describe() for r in self.chain]}


@dataclass
class TopologySummary:
    genus: int
    punctures: int
    orientable: bool
    chi: int

    def __post_init__(self):
        if self.orientable and self.chi != 2 - 2 * self.genus - self.punctures:
            raise DomainError("chi != 2 - 2g - n for an orientable complex")

    def to_dict(self):
        return {"g": self.genus, "n": self.punctures, "orientable": self.orientable, "chi": self.chi}


@dataclass
class Quotient:
    mesh: TriMesh
    vertex_map: np.ndarray  # global (concatenated) vertex id -> quotient id
    offsets: dict  # patch name -> offset into the concatenation


@dataclass
class SurfaceComplex:
    patches: list
    identifications: list = field(default_factory=list)
    deck: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def patch(self, name) -> Patch:
        for p in self.patches:
            if p.name == name:
                return p
        raise DomainError(f"no patch named {name!r}")

    def _arc(self, name, arc):
        p = self.patch(name)
        if arc not in p.mesh.tags:
            raise DomainError(f"dangling identification: patch {name!r} has no arc {arc!r}")
        return p.mesh.tags[arc]

    def quotient(self, tol=1e-7) -> Quotient:
        offsets, verts, faces, corners = {}, [], [], []
        o = 0
        for p in self.patches:
            offsets[p.name] = o
            verts.append(p.mesh.vertices)
            faces.append(p.mesh.faces + o)
            corners.append(p.mesh.corner_points())
            o += p.mesh.n_vertices
        verts = np.concatenate(verts)
        ds = DisjointSet(range(o))
        for idn in self.identifications:
            src = self._arc(idn.source, idn.source_arc) + offsets[idn.source]
            dst = self._arc(idn.target, idn.target_arc) + offsets[idn.target]
            if len(src) != len(dst):
                raise DomainError(f"identification {idn.label or idn.source_arc}: arcs differ in length")
            img = idn.iso.apply(verts[src])
            d, j = cKDTree(verts[dst]).query(img)
            # compare in the ambient metric; chart distances grow with y
            err = dist_product(img, verts[dst][j])
            if np.max(err) > tol or len(np.unique(j)) != len(dst):
                raise DomainError(f"identification {idn.label or idn.source_arc} does not match "
                                  f"(max mismatch {float(np.max(err)):.3g})")
            for a, b in zip(src, dst[j]):
                ds.merge(int(a), int(b))
        root = np.array([ds[i] for i in range(o)])
        keep, vmap = np.unique(root, return_inverse=True)
        F = vmap[np.concatenate(faces)]
        if np.any((F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 0] == F[:, 2])):
            raise DomainError("identifications collapse a face")
        tags = {}
        for p in self.patches:
            for k, ids in p.mesh.tags.items():
                tags[f"{p.name}:{k}"] = vmap[ids + offsets[p.name]]
        corners = np.concatenate(corners)
        sign = orientation_signs(F)
        if sign is not None:
            # reflected patches come with flipped faces; make the orientation coherent
            flip = sign < 0
            F[flip] = F[flip][:, ::-1]
            corners[flip] = corners[flip][:, ::-1]
        mesh = TriMesh(verts[keep], F, tags, corners)
        return Quotient(mesh, vmap, offsets)

    def euler_characteristic(self, tol=1e-7):
        return self.quotient(tol).mesh.euler_characteristic()

    def is_connected(self, mesh=None):
        mesh = self.quotient().mesh if mesh is None else mesh
        return len(_face_components(mesh.faces)) == 1

    def topology(self, mesh=None) -> TopologySummary:
        mesh = self.quotient().mesh if mesh is None else mesh
        chi = mesh.euler_characteristic()
        n = len(mesh.boundary_loops())
        orientable = is_orientable(mesh.faces)
        k = 2 - chi - n
        return TopologySummary(k // 2 if orientable else k, n, orientable, chi)

    def deck_check(self):
        """Max ambient distance between ``iso(patch)`` and the reflection chain image."""
        out = {}
        for g in self.deck:
            P = self.patch(g.patch).mesh.vertices
            ref = P
            for r in g.chain:
                ref = r.apply(ref)
            img = g.iso.apply(P)
            d, j = cKDTree(ref).query(img)
            out[g.label] = float(np.max(dist_product(img, ref[j])))
        return out

    def smooth_total_curvature(self, face_masks=None):
        """Sum of smooth ``int K dA`` over graph patches."""
        from .curvature import smooth_total_curvature

        total = 0.0
        for p in self.patches:
            if not p.graph:
                raise DomainError(f"patch {p.name!r} is not a graph; use polyhedral totals")
            V = p.mesh.vertices
            mask = None if face_masks is None else face_masks.get(p.name)
            total += smooth_total_curvature(V[:, :2], V[:, 2], p.mesh.faces, mask)[0]
        return total

    def manifest(self, topology: TopologySummary = None, files=None):
        topology = self.topology() if topology is None else topology
        files = files or {}
        return {
            "patches": [{"name": p.name, "provenance": list(p.provenance),
                         "n_vertices": p.mesh.n_vertices, "n_faces": p.mesh.n_faces,
                         "file": files.get(p.name)} for p in self.patches],
            "identifications": [i.to_dict() for i in self.identifications],
            "deck": [g.to_dict() for g in self.deck],
            **topology.to_dict(),
            "meta": self.meta,
        }


def _face_adjacency(faces):
    """Pairs of faces sharing an edge, with the shared directed edge sign."""
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    fid = np.tile(np.arange(len(faces)), 3)
    key = np.sort(he, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, he, fid = key[order], he[order], fid[order]
    same = np.all(key[1:] == key[:-1], axis=1)
    i = np.flatnonzero(same)
    # +1 when the two faces traverse the edge in opposite directions (coherent)
    coherent = np.where(he[i, 0] != he[i + 1, 0], 1, -1)
    return fid[i], fid[i + 1], coherent


def _face_components(faces):
    a, b, _ = _face_adjacency(faces)
    ds = DisjointSet(range(len(faces)))
    for x, y in zip(a, b):
        ds.merge(int(x), int(y))
    return ds.subsets()


def orientation_signs(faces):
    """Per-face signs making the orientation coherent, or ``None`` if impossible.

    The first face of each connected component keeps its orientation.
    """
    faces = np.asarray(faces)
    a, b, c = _face_adjacency(faces)
    nbrs = [[] for _ in range(len(faces))]
    for x, y, s in zip(a, b, c):
        nbrs[x].append((y, s))
        nbrs[y].append((x, s))
    sign = np.zeros(len(faces), dtype=int)
    for start in range(len(faces)):
        if sign[start]:
            continue
        sign[start] = 1
        q = deque([start])
        while q:
            f = q.popleft()
            for g, s in nbrs[f]:
                want = sign[f] * s
                if sign[g] == 0:
                    sign[g] = want
                    q.append(g)
                elif sign[g] != want:
                    return None
    return sign


def is_orientable(faces):
    """Propagate face orientations over the dual graph; a contradiction means non-orientable."""
    return orientation_signs(faces) is not None


def normal_mismatch(patch: TriMesh, image: TriMesh, arc, rule: ReflectionRule):
    """Max angle between the two one-sided unit normals along a reflected arc.

    Normals come from the graph fits of each side, written in the orthonormal
    frame ``(y d/dx, y d/dy, d/dt)``.  At a fixed point the rotation's
    differential is orthogonal in that frame, so the image normal is pulled
    back by its transpose.
    """
    from .curvature import graph_derivatives

    ids = patch.tags[arc]

    def normals(m):
        D = graph_derivatives(m.vertices[:, :2], m.vertices[:, 2], m.faces)[ids]
        y = m.vertices[ids, 1]
        n = np.stack([-y * D[:, 0], -y * D[:, 1], np.ones(len(ids))], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    n0, n1 = normals(patch), normals(image)
    P = patch.vertices[ids]
    y = P[:, 1:2]
    eps = 1e-6
    J = np.zeros((len(ids), 3, 3))
    base = rule.apply(P)
    for k in range(3):
        d = np.zeros((len(ids), 3))
        d[:, k] = eps * (y[:, 0] if k < 2 else 1.0)
        q = rule.apply(P + d) - base
        q[:, :2] /= y
        J[:, :, k] = q / eps
    back = np.einsum("nji,nj->ni", J, n1)
    back /= np.linalg.norm(back, axis=1, keepdims=True)
    cos = np.abs(np.sum(n0 * back, axis=1))
    return float(np.max(np.arccos(np.clip(cos, -1.0, 1.0))))
