"""Global block matrices of the mixed eigenproblem.

For the H-field system every edge and every vertex carries a DOF and all
boundary conditions are natural.  For the E-field system boundary edges
(tangential trace) and boundary vertices (dummy variable) are eliminated.
The naive curl-curl system keeps only the interior edges and no scalar
unknowns.

The generalized eigenproblem is::

    [A  beta*B] [xi  ]            [D  0] [xi  ]
    [C  0     ] [zeta] = Lambda * [0  0] [zeta]

with ``beta = ||A||_inf / ||B||_inf``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .fem_kernels import Formulation, Medium, batch_matrices
from .mesh import Mesh

__all__ = [
    "AssemblyError",
    "DofMap",
    "BlockSystem",
    "GEVP",
    "build_dofmap",
    "assemble",
    "compute_beta",
    "build_gevp",
    "discrete_gradient",
    "write_matrix_market",
]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DofMap:
    edge_dofs: np.ndarray            # active global edge ids, ascending
    scalar_dofs: np.ndarray          # active global vertex ids, ascending
    constrained_edges: np.ndarray
    constrained_vertices: np.ndarray
    n_edges_total: int
    n_vertices_total: int

    @property
    def m(self) -> int:
        return len(self.edge_dofs)

    @property
    def n(self) -> int:
        return len(self.scalar_dofs)

    def edge_index(self) -> np.ndarray:
        """Global edge id -> active index (-1 when constrained)."""
        idx = np.full(self.n_edges_total, -1, dtype=np.int64)
        idx[self.edge_dofs] = np.arange(self.m)
        return idx

    def vertex_index(self) -> np.ndarray:
        idx = np.full(self.n_vertices_total, -1, dtype=np.int64)
        idx[self.scalar_dofs] = np.arange(self.n)
        return idx


def build_dofmap(mesh: Mesh, formulation) -> DofMap:
    formulation = Formulation.parse(formulation)
    all_e = np.arange(mesh.n_edges)
    all_v = np.arange(mesh.n_vertices)
    if formulation is Formulation.HFIELD:
        ce = np.empty(0, dtype=np.int64)
        cv = np.empty(0, dtype=np.int64)
        sv = all_v
    else:
        ce = np.asarray(mesh.boundary_edges, dtype=np.int64)
        cv = np.asarray(mesh.boundary_vertices, dtype=np.int64)
        sv = np.setdiff1d(all_v, cv)
        if formulation is Formulation.NAIVE:
            # no scalar unknowns at all; vertices are simply not DOFs
            sv = np.empty(0, dtype=np.int64)
            cv = np.empty(0, dtype=np.int64)
    return DofMap(
        edge_dofs=np.setdiff1d(all_e, ce),
        scalar_dofs=sv,
        constrained_edges=ce,
        constrained_vertices=cv,
        n_edges_total=mesh.n_edges,
        n_vertices_total=mesh.n_vertices,
    )


def discrete_gradient(mesh: Mesh, edge_dofs, vertex_ids) -> sp.csr_matrix:
    """Edge coefficients of nodal-function gradients, shape ``(len(edge_dofs), len(vertex_ids))``.

    Column ``j`` is the edge-DOF vector of ``grad(s_j)``: ``+1`` on edges
    ending at the vertex, ``-1`` on edges starting there.
    """
    eidx = np.full(mesh.n_edges, -1, dtype=np.int64)
    eidx[edge_dofs] = np.arange(len(edge_dofs))
    vidx = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vidx[vertex_ids] = np.arange(len(vertex_ids))
    rows = np.repeat(eidx, 2)
    cols = vidx[mesh.edges.ravel()]
    vals = np.tile([-1.0, 1.0], mesh.n_edges)
    keep = (rows >= 0) & (cols >= 0)
    return sp.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(len(edge_dofs), len(vertex_ids))
    )


@dataclass(frozen=True, eq=False)
class BlockSystem:
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    beta: float
    formulation: Formulation
    dofmap: DofMap
    gradient: sp.csr_matrix  # (m, n_grad) discrete gradients of interior/all nodal functions
    h: float
    simply_connected: bool

    @property
    def m(self) -> int:
        return self.dofmap.m

    @property
    def n(self) -> int:
        return self.dofmap.n


@dataclass(frozen=True, eq=False)
class GEVP:
    """Sparse pencil ``K x = Lambda M x``.

    ``gauge`` is a vector that is not orthogonal to a shared null vector of
    ``K`` and ``M`` (H-field: the constant dummy variable).  Solvers border the
    pencil with it so the shifted matrix becomes nonsingular; eigenvalues are
    unchanged and the dummy variable is pinned to zero at one vertex.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    m: int
    n: int
    gauge: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.m + self.n


def _media_table(mesh: Mesh, media):
    regions = np.unique(mesh.region)
    if isinstance(media, Medium):
        media = {int(r): media for r in regions}
    missing = [int(r) for r in regions if int(r) not in media]
    if missing:
        raise AssemblyError(f"no medium given for region(s) {missing}")
    return regions, media


def _canonical_tet_rank(tets):
    # rank of each tet in a tet-order independent ordering
    s = np.sort(tets, axis=1)
    order = np.lexsort(s.T[::-1])
    rank = np.empty(len(tets), dtype=np.int64)
    rank[order] = np.arange(len(tets))
    return rank


def _reduce(rows, cols, vals, tet_rank, shape):
    """Sum duplicate entries in an order fixed by (row, col, tet rank)."""
    keep = (rows >= 0) & (cols >= 0)
    rows, cols, vals, tet_rank = rows[keep], cols[keep], vals[keep], tet_rank[keep]
    if len(rows) == 0:
        return sp.csr_matrix(shape, dtype=complex)
    order = np.lexsort((tet_rank, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    new = np.ones(len(rows), dtype=bool)
    new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(new)
    summed = np.add.reduceat(vals, starts)
    return sp.csr_matrix((summed, (rows[starts], cols[starts])), shape=shape)


def compute_beta(A, B) -> float:
    """``||A||_inf / ||B||_inf`` (maximum absolute row sums)."""
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    if B.nnz == 0 or not np.any(B.data):
        raise AssemblyError("constraint scaling needs a nonzero coupling matrix B")
    rho_a = float(np.max(np.abs(A).sum(axis=1))) if A.nnz else 0.0
    rho_b = float(np.max(np.abs(B).sum(axis=1)))
    if rho_a <= 0.0:
        raise AssemblyError("curl-curl matrix A is zero; beta undefined")
    return rho_a / rho_b


def assemble(mesh: Mesh, media, formulation) -> BlockSystem:
    """Assemble ``A, B, C, D`` on the active DOFs of a formulation.

    ``media`` is a :class:`Medium` (whole mesh) or a mapping region id -> Medium.
    """
    formulation = Formulation.parse(formulation)
    regions, media = _media_table(mesh, media)
    dofmap = build_dofmap(mesh, formulation)
    m, n = dofmap.m, dofmap.n
    if m + n > np.iinfo(np.int32).max:
        raise AssemblyError(f"system dimension {m + n} overflows 32-bit sparse indices")

    Tc = np.empty((len(mesh.tets), 3, 3), dtype=complex)
    Tm = np.empty_like(Tc)
    for r in regions:
        sel = mesh.region == r
        c, mm = media[int(r)].tensors(formulation)
        Tc[sel] = c
        Tm[sel] = mm

    P = mesh.vertices[mesh.tets]
    A_e, D_e, B_e, C_e = batch_matrices(P, Tc, Tm, with_constraint=formulation.mixed)
    s = mesh.tet_edge_signs.astype(float)
    ss = s[:, :, None] * s[:, None, :]
    eidx = dofmap.edge_index()[mesh.tet_edges]           # (T, 6)
    rank = _canonical_tet_rank(mesh.tets)

    rr = np.repeat(eidx, 6, axis=1).ravel()
    cc = np.tile(eidx, (1, 6)).ravel()
    rk = np.repeat(rank, 36)
    A = _reduce(rr, cc, (ss * A_e).ravel(), rk, (m, m))
    D = _reduce(rr, cc, (ss * D_e).ravel(), rk, (m, m))

    if formulation.mixed:
        vidx = dofmap.vertex_index()[mesh.tets]          # (T, 4)
        rb = np.repeat(eidx, 4, axis=1).ravel()
        cb = np.tile(vidx, (1, 6)).ravel()
        rk24 = np.repeat(rank, 24)
        B = _reduce(rb, cb, (s[:, :, None] * B_e).ravel(), rk24, (m, n))
        rc = np.repeat(vidx, 6, axis=1).ravel()
        ccc = np.tile(eidx, (1, 4)).ravel()
        C = _reduce(rc, ccc, (s[:, None, :] * C_e).ravel(), rk24, (n, m))
        beta = compute_beta(A, B) if n > 0 else 1.0
        grad = discrete_gradient(mesh, dofmap.edge_dofs, dofmap.scalar_dofs)
    else:
        B = sp.csr_matrix((m, 0), dtype=complex)
        C = sp.csr_matrix((0, m), dtype=complex)
        beta = 1.0
        interior = np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_vertices)
        grad = discrete_gradient(mesh, dofmap.edge_dofs, interior)

    return BlockSystem(
        A=A, B=B, C=C, D=D, beta=beta, formulation=formulation, dofmap=dofmap,
        gradient=grad, h=mesh.h, simply_connected=mesh.simply_connected,
    )


def build_gevp(system: BlockSystem) -> GEVP:
    m, n = system.m, system.n
    if not system.formulation.mixed or n == 0:
        return GEVP(K=system.A.tocsr(), M=system.D.tocsr(), m=m, n=0)
    K = sp.bmat(
        [[system.A, system.beta * system.B], [system.C, None]], format="csr"
    )
    M = sp.bmat(
        [[system.D, None], [None, sp.csr_matrix((n, n), dtype=complex)]], format="csr"
    )
    gauge = None
    if system.formulation is Formulation.HFIELD:
        gauge = np.zeros(m + n)
        gauge[m] = 1.0
    return GEVP(K=K, M=M, m=m, n=n, gauge=gauge)


def write_matrix_market(system: BlockSystem, directory) -> list[str]:
    """Write ``A, B, C, D`` as complex general MatrixMarket files."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name in ("A", "B", "C", "D"):
        mat = sp.coo_matrix(getattr(system, name), dtype=complex)
        path = os.path.join(str(directory), f"{name}.mtx")
        scipy.io.mmwrite(
            path, mat, field="complex", symmetry="general", precision=17,
            comment=f"{system.formulation.name} block {name}, beta={system.beta!r}",
        )
        paths.append(path)
    return paths
