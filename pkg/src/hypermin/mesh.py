"""Triangle meshes in the (x, y, t) chart, plus OBJ / VTK writers."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .hyperbolic import AmbientKind, Isometry, segment_length


@dataclass
class TriMesh:
    """Vertices ``(N, 3)``, faces ``(F, 3)`` and named boundary tags.

    ``tags`` maps a name to an ordered array of vertex ids (a boundary arc).
    ``corners``, when set, holds lifted corner coordinates ``(F, 3, 3)``; it lets
    a quotient surface (vertices identified by deck maps) keep honest edge
    lengths.  Intrinsic computations always go through :meth:`corner_points`.
    """

    vertices: np.ndarray
    faces: np.ndarray
    tags: dict = field(default_factory=dict)
    corners: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise DomainError("face index out of range")
        self.tags = {k: np.asarray(v, dtype=np.int64) for k, v in self.tags.items()}

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def corner_points(self):
        if self.corners is not None:
            return self.corners
        return self.vertices[self.faces]

    def edges(self):
        """Unique undirected edges, sorted ``(E, 2)``."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def _edge_counts(self):
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def boundary_edges(self):
        uniq, counts = self._edge_counts()
        if np.any(counts > 2):
            raise DomainError("non-manifold edge (shared by more than two faces)")
        return uniq[counts == 1]

    def boundary_vertices(self):
        return np.unique(self.boundary_edges())

    def interior_mask(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices()] = False
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.faces.ravel()] = True
        return mask & used

    def boundary_loops(self):
        """Boundary edges chained into closed loops of vertex ids.

        Loops follow the face orientation where it is coherent; on a
        non-orientable quotient the direction of a loop is arbitrary.
        """
        he = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        key = np.sort(he, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        bnd = he[counts[inv.ravel()] == 1]
        nbr, succ = {}, {}
        for a, b in bnd:
            a, b = int(a), int(b)
            nbr.setdefault(a, []).append(b)
            nbr.setdefault(b, []).append(a)
            succ.setdefault(a, b)
        if any(len(v) != 2 for v in nbr.values()):
            raise DomainError("boundary is not a disjoint union of simple loops")
        loops, seen = [], set()
        for start in sorted(nbr):
            if start in seen:
                continue
            loop, prev, v = [start], start, succ.get(start, nbr[start][0])
            seen.add(start)
            while v != start:
                if v in seen:
                    raise DomainError("boundary chain does not close")
                seen.add(v)
                loop.append(v)
                a, b = nbr[v]
                prev, v = v, (b if a == prev else a)
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    def euler_characteristic(self):
        used = np.unique(self.faces)
        return len(used) - len(self.edges()) + self.n_faces

    def face_edge_lengths(self, ambient=AmbientKind.PRODUCT):
        """Metric edge lengths; column ``k`` is the edge opposite corner ``k``."""
        c = self.corner_points()
        return np.stack([
            segment_length(c[:, 1], c[:, 2], ambient),
            segment_length(c[:, 2], c[:, 0], ambient),
            segment_length(c[:, 0], c[:, 1], ambient),
        ], axis=1)

    def max_edge_length(self, ambient=AmbientKind.PRODUCT):
        return float(self.face_edge_lengths(ambient).max())

    def transformed(self, iso: Isometry, flip=False):
        """Image under an isometry; ``flip`` reverses face orientation."""
        faces = self.faces[:, ::-1].copy() if flip else self.faces.copy()
        corners = None
        if self.corners is not None:
            corners = iso.apply(self.corners.reshape(-1, 3)).reshape(self.corners.shape)
            if flip:
                corners = corners[:, ::-1].copy()
        return TriMesh(iso.apply(self.vertices), faces,
                       {k: v.copy() for k, v in self.tags.items()}, corners)

    def submesh(self, face_mask):
        """Keep the selected faces; returns ``(mesh, old_vertex_ids)``."""
        face_mask = np.asarray(face_mask, dtype=bool)
        faces = self.faces[face_mask]
        keep = np.unique(faces)
        remap = -np.ones(self.n_vertices, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        tags = {}
        for k, ids in self.tags.items():
            ids = ids[remap[ids] >= 0]
            if len(ids):
                tags[k] = remap[ids]
        corners = None if self.corners is None else self.corners[face_mask]
        return TriMesh(self.vertices[keep], remap[faces], tags, corners), keep


def grid_faces(nu, nv, offset=0):
    """Faces of an ``nu x nv`` structured grid with vertex id ``i * nv + j``."""
    i, j = np.meshgrid(np.arange(nu - 1), np.arange(nv - 1), indexing="ij")
    a = (i * nv + j).ravel() + offset
    b = a + nv
    c = a + nv + 1
    d = a + 1
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])


def subdivide(mesh: TriMesh) -> TriMesh:
    """Split every face into four at the chart midpoints of its edges.

    Old vertices keep their ids; tags keep their old vertices only.
    """
    F = mesh.faces
    e = np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(3, -1).T + mesh.n_vertices  # midpoint ids of edges 01, 12, 20
    mids = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    ab, bc, ca = inv[:, 0], inv[:, 1], inv[:, 2]
    faces = np.concatenate([np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
                            np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)])
    return TriMesh(np.concatenate([mesh.vertices, mids]), faces,
                   {k: v.copy() for k, v in mesh.tags.items()})


def merge_meshes(meshes, tol=1e-10):
    """Concatenate meshes and weld vertices closer than ``tol`` (chart metric)."""
    from scipy.spatial import cKDTree

    verts = np.concatenate([m.vertices for m in meshes])
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes])
    faces = np.concatenate([m.faces + o for m, o in zip(meshes, offsets)])
    tree = cKDTree(verts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(verts))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(len(verts))])
    keep, inverse = np.unique(roots, return_inverse=True)
    tags = {}
    for idx, (m, o) in enumerate(zip(meshes, offsets)):
        for k, ids in m.tags.items():
            tags[f"{idx}:{k}"] = inverse[ids + o]
    return TriMesh(verts[keep], inverse[faces], tags), inverse


# --------------------------------------------------------------------------
# file formats


def write_obj(mesh: TriMesh, path, comments=()):
    path = Path(path)
    lines = ["# hypermin mesh (x y t chart coordinates)"] + [f"# {c}" for c in comments]
    lines += [f"v {x:.17g} {y:.17g} {t:.17g}" for x, y, t in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_obj(path) -> TriMesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


def write_vtk(mesh: TriMesh, path, point_data=None, title="hypermin"):
    """Legacy ASCII VTK polydata with optional per-vertex scalar fields."""
    path = Path(path)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA",
           f"POINTS {mesh.n_vertices} double"]
    out += [f"{x:.17g} {y:.17g} {t:.17g}" for x, y, t in mesh.vertices]
    out.append(f"POLYGONS {mesh.n_faces} {4 * mesh.n_faces}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    if point_data:
        out.append(f"POINT_DATA {mesh.n_vertices}")
        for name in sorted(point_data):
            vals = np.asarray(point_data[name], dtype=float)
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [f"{v:.17g}" for v in vals]
    path.write_text("\n".join(out) + "\n")
    return path
