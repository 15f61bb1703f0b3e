"""Conforming tetrahedral meshes with globally oriented edges.

A :class:`Mesh` is built from vertex coordinates and tetrahedron connectivity;
everything else (edges, faces, incidence signs, boundary sets, ``h``) is
derived in :meth:`Mesh.from_arrays`.  Edge ``k`` always runs from its lower
to its higher global vertex id.

Generators for the three validation geometries live here as well:

* :func:`generate_box_mesh`: structured grid, Kuhn split (6 tets per cell)
* :func:`generate_cylinder_mesh`: ring-triangulated disc extruded along z
* :func:`generate_torus_mesh`: ring-triangulated disc revolved about z
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

__all__ = [
    "LOCAL_EDGES",
    "LOCAL_FACES",
    "Mesh",
    "MeshError",
    "generate_box_mesh",
    "generate_cylinder_mesh",
    "generate_torus_mesh",
    "classify_boundary",
    "disc_triangulation",
]

# local vertex pairs of the six tet edges; direction is first -> second
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
# face i is opposite local vertex i
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])

VOLUME_TOLERANCE = 1e-14


class MeshError(ValueError):
    """Invalid mesh input or a mesh that violates conformity."""


def _signed_volumes(vertices, tets):
    p = vertices[tets]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    d3 = p[:, 3] - p[:, 0]
    return np.einsum("ij,ij->i", np.cross(d1, d2), d3) / 6.0


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable tetrahedral mesh.

    Array fields (all numpy):

    ``vertices`` (V, 3) float, ``tets`` (T, 4) int with positive orientation,
    ``region`` (T,) int, ``edges`` (E, 2) int with ``edges[:, 0] < edges[:, 1]``,
    ``tet_edges`` (T, 6) global edge ids following :data:`LOCAL_EDGES`,
    ``tet_edge_signs`` (T, 6) +1/-1, ``faces`` (F, 3) sorted vertex triples,
    ``boundary_faces`` / ``boundary_edges`` / ``boundary_vertices`` index sets.
    """

    vertices: np.ndarray
    tets: np.ndarray
    region: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    tet_edge_signs: np.ndarray
    faces: np.ndarray
    tet_faces: np.ndarray
    boundary_faces: np.ndarray
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    h: float
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, vertices, tets, region=None, meta=None) -> "Mesh":
        vertices = np.ascontiguousarray(vertices, dtype=float)
        tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (N, 3) array")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("vertex coordinates must be finite")
        if len(tets) == 0:
            raise MeshError("mesh has no tetrahedra")
        if tets.min() < 0 or tets.max() >= len(vertices):
            raise MeshError("tetrahedron references a vertex that does not exist")
        srt = np.sort(tets, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise MeshError("tetrahedron with repeated vertex ids")
        if region is None:
            region = np.zeros(len(tets), dtype=np.int64)
        region = np.asarray(region, dtype=np.int64).reshape(-1)
        if len(region) != len(tets):
            raise MeshError("region tags must match the number of tetrahedra")

        vol = _signed_volumes(vertices, tets)
        scale = max(np.ptp(vertices, axis=0).max(), 1e-300) ** 3
        if np.any(np.abs(vol) <= VOLUME_TOLERANCE * scale):
            bad = int(np.argmin(np.abs(vol)))
            raise MeshError(f"degenerate tetrahedron {bad} (volume {vol[bad]:.3e})")
        flip = vol < 0
        tets[flip] = tets[flip][:, [1, 0, 2, 3]]

        # edges
        le = tets[:, LOCAL_EDGES]  # (T, 6, 2)
        lo = le.min(axis=2)
        hi = le.max(axis=2)
        pairs = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inv = np.unique(pairs, axis=0, return_inverse=True)
        tet_edges = inv.reshape(-1, 6)
        tet_edge_signs = np.where(le[:, :, 0] < le[:, :, 1], 1, -1).astype(np.int8)

        faces_all = np.sort(tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
        faces, finv, counts = np.unique(
            faces_all, axis=0, return_inverse=True, return_counts=True
        )
        finv = finv.reshape(-1)
        if np.any(counts > 2):
            raise MeshError(
                f"non-manifold mesh: {int(np.sum(counts > 2))} faces shared by more than two tets"
            )
        bfaces = np.flatnonzero(counts == 1)
        bverts = np.unique(faces[bfaces])
        bf = faces[bfaces]
        bpairs = np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]])
        bpairs = np.unique(bpairs, axis=0)
        # locate boundary pairs in the sorted edge list
        key = edges[:, 0] * len(vertices) + edges[:, 1]
        bkey = bpairs[:, 0] * len(vertices) + bpairs[:, 1]
        bedges = np.searchsorted(key, bkey)

        lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
        return cls(
            vertices=vertices,
            tets=tets,
            region=region,
            edges=edges,
            tet_edges=tet_edges,
            tet_edge_signs=tet_edge_signs,
            faces=faces,
            tet_faces=finv.reshape(-1, 4),
            boundary_faces=bfaces,
            boundary_edges=bedges,
            boundary_vertices=bverts,
            h=float(lengths.max()),
            meta=dict(meta or {}),
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces - self.n_tets

    @property
    def boundary_euler_characteristic(self) -> int:
        """V_b - E_b + F_b of the boundary surface."""
        return (
            len(self.boundary_vertices)
            - len(self.boundary_edges)
            + len(self.boundary_faces)
        )

    @property
    def simply_connected(self) -> bool:
        # a solid with connected boundary and no handles has chi == 1
        return self.euler_characteristic == 1

    def volumes(self) -> np.ndarray:
        return _signed_volumes(self.vertices, self.tets)

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(
            self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1
        )

    def stats(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "faces": self.n_faces,
            "tets": self.n_tets,
            "boundary_faces": len(self.boundary_faces),
            "boundary_edges": len(self.boundary_edges),
            "boundary_vertices": len(self.boundary_vertices),
            "euler_characteristic": self.euler_characteristic,
            "h": self.h,
            "volume": float(self.volumes().sum()),
            "regions": sorted(int(r) for r in np.unique(self.region)),
        }

    def dump(self) -> str:
        """Structured text dump (JSON) for debugging."""
        return json.dumps(
            {
                "stats": self.stats(),
                "meta": self.meta,
                "vertices": self.vertices.tolist(),
                "tets": self.tets.tolist(),
                "region": self.region.tolist(),
                "edges": self.edges.tolist(),
                "boundary_faces": self.faces[self.boundary_faces].tolist(),
            },
            indent=1,
        )

    def permuted(self, order) -> "Mesh":
        """Same mesh with the tetrahedron list reordered."""
        order = np.asarray(order)
        return Mesh.from_arrays(self.vertices, self.tets[order], self.region[order], self.meta)


def classify_boundary(mesh: Mesh) -> Mesh:
    """Recompute boundary faces, edges and vertices.

    Faces used by exactly one tet are boundary; a face used by more than two
    tets raises :class:`MeshError`.
    """
    return Mesh.from_arrays(mesh.vertices, mesh.tets, mesh.region, mesh.meta)


def _check_positive(**kw):
    for name, val in kw.items():
        if not np.isfinite(val) or val <= 0:
            raise MeshError(f"{name} must be positive, got {val}")


def _check_count(minimum, **kw):
    for name, val in kw.items():
        if int(val) != val or val < minimum:
            raise MeshError(f"{name} must be an integer >= {minimum}, got {val}")


def generate_box_mesh(a, b, c, nx, ny, nz) -> Mesh:
    """Box ``[0,a]x[0,b]x[0,c]`` split into ``6*nx*ny*nz`` Kuhn tetrahedra."""
    _check_positive(a=a, b=b, c=c)
    _check_count(1, nx=nx, ny=ny, nz=nz)
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    zs = np.linspace(0.0, c, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    # every Kuhn simplex walks from the low corner to the high corner,
    # one axis at a time, in the order given by a permutation
    for perm in permutations(range(3)):
        step = np.zeros(3, dtype=int)
        path = [vid(I, J, K)]
        for ax in perm:
            step[ax] = 1
            path.append(vid(I + step[0], J + step[1], K + step[2]))
        tets.append(np.stack(path, axis=1))
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return Mesh.from_arrays(
        vertices, tets, meta={"geometry": "box", "dims": [a, b, c], "cells": [nx, ny, nz]}
    )


def disc_triangulation(radius, n_az, n_rings):
    """Triangulate a disc by concentric rings.

    Ring ``k`` (1-based) carries ``n_az * k`` points at radius
    ``k * radius / n_rings``, which keeps triangles near equilateral for
    ``n_az = 6``; the outermost ring lies exactly on the circle.
    Returns ``(points (P, 2), triangles (Tr, 3))``.
    """
    counts = [n_az * k for k in range(1, n_rings + 1)]
    pts = [np.zeros((1, 2))]
    starts = []
    offset = 1
    for k, cnt in enumerate(counts, start=1):
        ang = 2.0 * np.pi * np.arange(cnt) / cnt
        rad = radius if k == n_rings else radius * k / n_rings
        pts.append(rad * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        starts.append(offset)
        offset += cnt
    tris = []
    c0 = counts[0]
    for i in range(c0):
        tris.append((0, starts[0] + i, starts[0] + (i + 1) % c0))
    for k in range(1, n_rings):
        a, b = counts[k - 1], counts[k]
        sa, sb = starts[k - 1], starts[k]
        i = j = 0
        # zip the two rings together in angular order
        while i < a or j < b:
            next_in = (i + 1) / a
            next_out = (j + 1) / b
            if j < b and (i == a or next_out <= next_in):
                tris.append((sa + i % a, sb + j % b, sb + (j + 1) % b))
                j += 1
            else:
                tris.append((sa + i % a, sb + j % b, sa + (i + 1) % a))
                i += 1
    return np.concatenate(pts), np.array(tris, dtype=np.int64)


# reorderings of a prism (0,1,2 bottom; 3,4,5 above them) that move vertex
# position p to the front while preserving the prism structure
_PRISM_ROT = np.array(
    [
        [0, 1, 2, 3, 4, 5],
        [1, 2, 0, 4, 5, 3],
        [2, 0, 1, 5, 3, 4],
        [3, 4, 5, 0, 1, 2],
        [4, 5, 3, 1, 2, 0],
        [5, 3, 4, 2, 0, 1],
    ]
)


def split_prisms(prisms: np.ndarray) -> np.ndarray:
    """Split prisms into 3 tets each.

    Each quadrilateral face is cut by the diagonal through its lowest global
    vertex id, so neighbouring prisms agree on the shared face.
    """
    prisms = np.asarray(prisms, dtype=np.int64)
    first = np.argmin(prisms, axis=1)
    v = np.take_along_axis(prisms, _PRISM_ROT[first], axis=1)
    out = np.empty((len(v), 3, 4), dtype=np.int64)
    out[:, 0] = v[:, [0, 3, 4, 5]]
    diag15 = np.minimum(v[:, 1], v[:, 5]) < np.minimum(v[:, 2], v[:, 4])
    out[:, 1] = np.where(diag15[:, None], v[:, [0, 1, 2, 5]], v[:, [0, 1, 2, 4]])
    out[:, 2] = np.where(diag15[:, None], v[:, [0, 1, 5, 4]], v[:, [0, 2, 5, 4]])
    return out.reshape(-1, 4)


def generate_cylinder_mesh(r, height, n_az, n_rings, n_layers) -> Mesh:
    """Solid cylinder of radius ``r`` on ``0 <= z <= height``."""
    _check_positive(r=r, height=height)
    _check_count(3, n_az=n_az)
    _check_count(1, n_rings=n_rings, n_layers=n_layers)
    pts, tris = disc_triangulation(r, n_az, n_rings)
    P = len(pts)
    zs = np.linspace(0.0, height, n_layers + 1)
    vertices = np.concatenate(
        [np.column_stack([pts, np.full(P, z)]) for z in zs]
    )
    prisms = np.concatenate(
        [np.column_stack([tris + l * P, tris + (l + 1) * P]) for l in range(n_layers)]
    )
    return Mesh.from_arrays(
        vertices,
        split_prisms(prisms),
        meta={
            "geometry": "cylinder",
            "r": r,
            "height": height,
            "counts": [n_az, n_rings, n_layers],
            "prisms": len(prisms),
        },
    )


def generate_torus_mesh(rho1, rho2, n_major, n_minor_az, n_minor_rings) -> Mesh:
    """Solid torus with major radius ``rho1`` and minor radius ``rho2``.

    The minor cross-section (a ring-triangulated disc in the (rho, z) plane)
    is revolved ``n_major`` times around the z-axis and closed at the seam.
    """
    _check_positive(rho1=rho1, rho2=rho2)
    if rho1 <= rho2:
        raise MeshError(f"torus needs rho1 > rho2, got rho1={rho1}, rho2={rho2}")
    _check_count(3, n_major=n_major, n_minor_az=n_minor_az)
    _check_count(1, n_minor_rings=n_minor_rings)
    pts, tris = disc_triangulation(rho2, n_minor_az, n_minor_rings)
    P = len(pts)
    phis = 2.0 * np.pi * np.arange(n_major) / n_major
    rad = rho1 + pts[:, 0]
    vertices = np.concatenate(
        [np.column_stack([rad * np.cos(f), rad * np.sin(f), pts[:, 1]]) for f in phis]
    )
    prisms = np.concatenate(
        [
            np.column_stack([tris + l * P, tris + ((l + 1) % n_major) * P])
            for l in range(n_major)
        ]
    )
    return Mesh.from_arrays(
        vertices,
        split_prisms(prisms),
        meta={
            "geometry": "torus",
            "rho1": rho1,
            "rho2": rho2,
            "counts": [n_major, n_minor_az, n_minor_rings],
            "prisms": len(prisms),
        },
    )
