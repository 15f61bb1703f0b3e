"""ASCII Gmsh MSH reader (format versions 2.2 and 4.1) and a 2.2 writer.

Only linear tetrahedra (element type 4) are imported as volume cells.  Lower
dimensional elements (points, lines, triangles) are skipped; any other
volume element type is rejected.  The region id of a tet is its physical
tag; in 4.1 files without physical groups the volume entity tag is used.

Nodes not referenced by any tet are dropped, so the vertex numbering of the
returned mesh is compact.  ``meta["gmsh_node_tags"]`` maps it back.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, MeshError

__all__ = ["GmshError", "read_gmsh", "read_gmsh_file", "write_gmsh"]

TET4 = 4
# element type -> number of nodes (Gmsh numbering); first-order and common
# second-order types, enough to skip blocks and reject foreign volumes
NODES_PER_TYPE = {
    1: 2, 2: 3, 3: 4, 4: 4, 5: 8, 6: 6, 7: 5, 8: 3, 9: 6, 10: 9, 11: 10,
    12: 27, 13: 18, 14: 14, 15: 1, 16: 8, 17: 20, 18: 15, 19: 13,
}
VOLUME_TYPES = {4, 5, 6, 7, 11, 12, 13, 14, 17, 18, 19}


class GmshError(MeshError):
    """Malformed or unsupported MSH input; messages carry the line number."""


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.i = 0

    def next(self, what: str) -> str:
        while self.i < len(self.lines):
            line = self.lines[self.i].strip()
            self.i += 1
            if line:
                return line
        raise GmshError(f"line {self.i + 1}: unexpected end of file while reading {what}")

    def ints(self, what: str, count: int | None = None) -> list[int]:
        line = self.next(what)
        try:
            vals = [int(t) for t in line.split()]
        except ValueError:
            raise self.error(f"expected integers in {what}, got {line!r}") from None
        if count is not None and len(vals) < count:
            raise self.error(f"expected {count} values in {what}, got {len(vals)}")
        return vals

    def floats(self, what: str) -> list[float]:
        line = self.next(what)
        try:
            return [float(t) for t in line.split()]
        except ValueError:
            raise self.error(f"expected numbers in {what}, got {line!r}") from None

    def expect(self, tag: str):
        line = self.next(tag)
        if line != tag:
            raise self.error(f"expected {tag}, got {line!r}")

    def error(self, msg: str) -> GmshError:
        return GmshError(f"line {self.i}: {msg}")

    def skip_section(self, name: str):
        end = "$End" + name[1:]
        while True:
            if self.next(end) == end:
                return


def _read_22(L: _Lines):
    nodes, tets, tags = {}, [], []
    while L.i < len(L.lines):
        try:
            head = L.next("section header")
        except GmshError:
            break
        if head == "$Nodes":
            (n,) = L.ints("node count", 1)[:1]
            for _ in range(n):
                vals = L.floats("node")
                if len(vals) < 4:
                    raise L.error("node line needs id x y z")
                nodes[int(vals[0])] = vals[1:4]
            L.expect("$EndNodes")
        elif head == "$Elements":
            (n,) = L.ints("element count", 1)[:1]
            for _ in range(n):
                vals = L.ints("element", 3)
                etype, ntags = vals[1], vals[2]
                if etype not in NODES_PER_TYPE:
                    raise L.error(f"unknown element type {etype}")
                need = 3 + ntags + NODES_PER_TYPE[etype]
                if len(vals) < need:
                    raise L.error(f"element {vals[0]} has {len(vals)} fields, expected {need}")
                if etype in VOLUME_TYPES and etype != TET4:
                    raise L.error(f"unsupported volume element type {etype} (only 4-node tets)")
                if etype == TET4:
                    tets.append((vals[3 + ntags: need], L.i))
                    tags.append(vals[3] if ntags > 0 else 0)
            L.expect("$EndElements")
        elif head.startswith("$"):
            L.skip_section(head)
        else:
            raise L.error(f"unexpected content {head!r}")
    return nodes, tets, tags


def _read_entities_41(L: _Lines) -> dict:
    counts = L.ints("entity counts", 4)
    vol_phys = {}
    for dim, n in enumerate(counts):
        for _ in range(n):
            vals = L.floats("entity")
            tag = int(vals[0])
            # points: tag x y z nphys ...; others: tag 6 bbox numbers nphys ...
            pos = 4 if dim == 0 else 7
            if len(vals) <= pos:
                raise L.error("truncated entity record")
            nphys = int(vals[pos])
            phys = [int(v) for v in vals[pos + 1: pos + 1 + nphys]]
            if dim == 3:
                vol_phys[tag] = phys[0] if phys else None
    L.expect("$EndEntities")
    return vol_phys


def _read_41(L: _Lines):
    nodes, tets, tags = {}, [], []
    vol_phys = {}
    while L.i < len(L.lines):
        try:
            head = L.next("section header")
        except GmshError:
            break
        if head == "$Entities":
            vol_phys = _read_entities_41(L)
        elif head == "$Nodes":
            nblocks, _, _, _ = L.ints("node header", 4)[:4]
            for _ in range(nblocks):
                _, _, parametric, n = L.ints("node block header", 4)[:4]
                ids = [L.ints("node tag", 1)[0] for _ in range(n)]
                for t in ids:
                    xyz = L.floats("node coordinates")
                    if len(xyz) < 3:
                        raise L.error("node coordinates need x y z")
                    nodes[t] = xyz[:3]
                if parametric:
                    raise L.error("parametric node coordinates are not supported")
            L.expect("$EndNodes")
        elif head == "$Elements":
            nblocks = L.ints("element header", 4)[0]
            for _ in range(nblocks):
                dim, etag, etype, n = L.ints("element block header", 4)[:4]
                if etype not in NODES_PER_TYPE:
                    raise L.error(f"unknown element type {etype}")
                if etype in VOLUME_TYPES and etype != TET4:
                    raise L.error(f"unsupported volume element type {etype} (only 4-node tets)")
                k = NODES_PER_TYPE[etype]
                for _ in range(n):
                    vals = L.ints("element", 1 + k)
                    if etype == TET4:
                        tets.append((vals[1: 1 + k], L.i))
                        phys = vol_phys.get(etag)
                        tags.append(etag if phys is None else phys)
            L.expect("$EndElements")
        elif head.startswith("$"):
            L.skip_section(head)
        else:
            raise L.error(f"unexpected content {head!r}")
    return nodes, tets, tags


def read_gmsh(text: str) -> Mesh:
    """Parse MSH text into a :class:`Mesh`."""
    L = _Lines(text)
    L.expect("$MeshFormat")
    fmt = L.next("format line").split()
    if len(fmt) < 3:
        raise L.error("format line needs version, file type and data size")
    version, ftype = fmt[0], fmt[1]
    if ftype != "0":
        raise L.error("binary MSH files are not supported")
    L.expect("$EndMeshFormat")
    if version.startswith("2."):
        if version != "2.2":
            raise GmshError(f"line 2: unsupported MSH version {version}")
        nodes, tets, tags = _read_22(L)
    elif version == "4.1":
        nodes, tets, tags = _read_41(L)
    else:
        raise GmshError(f"line 2: unsupported MSH version {version}")
    if not tets:
        raise GmshError("no tetrahedral volume elements found")

    used = sorted({t for conn, _ in tets for t in conn})
    for conn, line in tets:
        for t in conn:
            if t not in nodes:
                raise GmshError(f"line {line}: element references undefined node {t}")
    index = {t: i for i, t in enumerate(used)}
    vertices = np.array([nodes[t] for t in used], dtype=float)
    conn = np.array([[index[t] for t in c] for c, _ in tets], dtype=np.int64)
    region = np.asarray(tags, dtype=np.int64)
    return Mesh.from_arrays(
        vertices, conn, region,
        meta={"source": f"gmsh {version}", "gmsh_node_tags": used},
    )


def read_gmsh_file(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        return read_gmsh(fh.read())


def write_gmsh(mesh: Mesh) -> str:
    """MSH 2.2 text with the tets only (physical tag = region id)."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.vertices.tolist())]
    out += ["$EndNodes", "$Elements", str(mesh.n_tets)]
    for i, (tet, r) in enumerate(zip(mesh.tets.tolist(), mesh.region.tolist())):
        out.append(f"{i + 1} 4 2 {r} {r} " + " ".join(str(v + 1) for v in tet))
    out += ["$EndElements", ""]
    return "\n".join(out)
