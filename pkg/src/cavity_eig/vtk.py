"""Legacy ASCII VTK export of computed modes.

Per mode the file carries the field vector at each tet centroid (cell data)
and the dummy scalar at the vertices (point data), each split into real and
imaginary arrays.  With no modes only the mesh is written.
"""

from __future__ import annotations

import numpy as np

from .fem_kernels import interpolate_edge_field
from .mesh import Mesh

__all__ = ["VTKError", "mode_fields", "vtk_text", "write_vtk"]

VTK_TETRA = 10


class VTKError(ValueError):
    pass


def mode_fields(mesh: Mesh, xi, zeta, edge_dofs, scalar_dofs):
    """Centroid field ``(T, 3)`` and vertex scalar ``(V,)`` of one mode.

    Constrained edges and vertices (zero by construction) are filled with 0.
    """
    edge_dofs = np.asarray(edge_dofs, dtype=np.int64)
    scalar_dofs = np.asarray(scalar_dofs, dtype=np.int64)
    xi = np.asarray(xi)
    zeta = np.asarray(zeta)
    if len(xi) != len(edge_dofs) or len(zeta) != len(scalar_dofs):
        raise VTKError(
            f"mode has {len(xi)} edge / {len(zeta)} scalar values, "
            f"DOF map expects {len(edge_dofs)} / {len(scalar_dofs)}"
        )
    if (edge_dofs.size and edge_dofs.max() >= mesh.n_edges) or (
        scalar_dofs.size and scalar_dofs.max() >= mesh.n_vertices
    ):
        raise VTKError("DOF map does not fit this mesh")
    ev = np.zeros(mesh.n_edges, dtype=complex)
    ev[edge_dofs] = xi
    sv = np.zeros(mesh.n_vertices, dtype=complex)
    sv[scalar_dofs] = zeta
    field = interpolate_edge_field(
        mesh.vertices, mesh.tets, mesh.tet_edges, mesh.tet_edge_signs, ev
    )
    return field, sv


def _block(rows) -> list[str]:
    return [" ".join(f"{v:.17g}" for v in row) for row in rows]


def vtk_text(mesh: Mesh, modes=(), title: str = "cavity modes") -> str:
    """``modes`` is a sequence of ``(name, field (T,3), scalar (V,))``."""
    title = " ".join(title.splitlines())[:255] or "cavity modes"
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_vertices} double")
    out += _block(mesh.vertices)
    out.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    out += ["4 " + " ".join(str(v) for v in tet) for tet in mesh.tets.tolist()]
    out.append(f"CELL_TYPES {mesh.n_tets}")
    out += [str(VTK_TETRA)] * mesh.n_tets
    modes = list(modes)
    out.append(f"CELL_DATA {mesh.n_tets}")
    out.append("SCALARS region int 1")
    out.append("LOOKUP_TABLE default")
    out += [str(r) for r in mesh.region.tolist()]
    for name, field, _ in modes:
        for part, fn in (("re", np.real), ("im", np.imag)):
            out.append(f"VECTORS {name}_field_{part} double")
            out += _block(fn(field))
    if modes:
        out.append(f"POINT_DATA {mesh.n_vertices}")
        for name, _, scalar in modes:
            for part, fn in (("re", np.real), ("im", np.imag)):
                out.append(f"SCALARS {name}_zeta_{part} double 1")
                out.append("LOOKUP_TABLE default")
                out += [f"{v:.17g}" for v in fn(scalar)]
    return "\n".join(out) + "\n"


def write_vtk(path, mesh: Mesh, results) -> int:
    """Write every mode of a loaded :class:`~cavity_eig.results.ResultsFile`.

    Returns the number of modes written.
    """
    header = results.header
    if (header.get("n_edges_total") != mesh.n_edges
            or header.get("n_vertices_total") != mesh.n_vertices):
        raise VTKError(
            f"results were computed on a mesh with {header.get('n_edges_total')} edges and "
            f"{header.get('n_vertices_total')} vertices; this mesh has {mesh.n_edges} and "
            f"{mesh.n_vertices}"
        )
    modes = []
    if results.modes:
        vec = results.vectors
        if vec is None:
            raise VTKError("results file carries no eigenvectors")
        if len(vec["xi"]) != len(results.modes):
            raise VTKError("eigenvector count does not match the mode records")
        for i, rec in enumerate(results.modes):
            field, scalar = mode_fields(mesh, vec["xi"][i], vec["zeta"][i],
                                        vec["edge_dofs"], vec["scalar_dofs"])
            modes.append((f"mode{i}", field, scalar))
    lam = ", ".join(f"{m.lam.real:.6g}{m.lam.imag:+.6g}j" for m in results.modes[:4])
    text = vtk_text(mesh, modes, title=f"{header.get('formulation', '?')} modes {lam}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return len(modes)
