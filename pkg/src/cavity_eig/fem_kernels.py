"""Element kernels: Whitney edge functions, linear nodal functions, local matrices.

All kernels work on batches of tetrahedra, shape ``(T, 4, 3)`` coordinates,
so assembly is a single vectorised pass.  Single-tet wrappers are provided
for tests and interactive use.

Local edge ``e = (i, j)`` from :data:`~cavity_eig.mesh.LOCAL_EDGES` carries the
Whitney function ``lambda_i grad(lambda_j) - lambda_j grad(lambda_i)``; the
global function multiplies this by the incidence sign.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mesh import LOCAL_EDGES, MeshError

__all__ = [
    "Formulation",
    "Medium",
    "QuadratureRule",
    "ElementMatrices",
    "TensorError",
    "DEGREE2",
    "barycentric_gradients",
    "edge_basis",
    "edge_curl",
    "invert_tensor",
    "local_matrices",
    "batch_matrices",
    "interpolate_edge_field",
]

DET_TOLERANCE = 1e-12


class TensorError(ValueError):
    pass


class Formulation(enum.Enum):
    EFIELD = "e"
    HFIELD = "h"
    NAIVE = "naive"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"e": cls.EFIELD, "efield": cls.EFIELD, "h": cls.HFIELD,
                   "hfield": cls.HFIELD, "naive": cls.NAIVE,
                   "naivecurlcurl": cls.NAIVE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown formulation {value!r} (use e, h or naive)") from None

    @property
    def mixed(self) -> bool:
        return self is not Formulation.NAIVE


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (Q, 4) barycentric
    weights: np.ndarray  # (Q,), fractions of the element volume
    degree: int


def _degree2_rule() -> QuadratureRule:
    alpha = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
    beta = (5.0 - np.sqrt(5.0)) / 20.0
    pts = np.full((4, 4), beta)
    np.fill_diagonal(pts, alpha)
    return QuadratureRule(points=pts, weights=np.full(4, 0.25), degree=2)


DEGREE2 = _degree2_rule()


def invert_tensor(t) -> np.ndarray:
    """Inverse of a complex 3x3 material tensor.

    Raises :class:`TensorError` when ``|det| < 1e-12 * ||t||^3``.
    """
    t = np.asarray(t, dtype=complex)
    if t.shape != (3, 3):
        raise TensorError(f"tensor must be 3x3, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise TensorError("tensor has non-finite entries")
    det = np.linalg.det(t)
    norm = np.linalg.norm(t, 2)
    if norm == 0.0 or abs(det) < DET_TOLERANCE * norm**3:
        raise TensorError(f"near-singular tensor: |det| = {abs(det):.3e}")
    return np.linalg.inv(t)


@dataclass(frozen=True)
class Medium:
    """Relative permittivity and permeability of one region.

    Neither tensor needs to be Hermitian; both must be invertible.
    """

    eps_r: np.ndarray
    mu_r: np.ndarray

    def __post_init__(self):
        eps = np.array(self.eps_r, dtype=complex)
        mu = np.array(self.mu_r, dtype=complex)
        if eps.ndim == 0:
            eps = eps * np.eye(3)
        if mu.ndim == 0:
            mu = mu * np.eye(3)
        invert_tensor(eps)
        invert_tensor(mu)
        eps.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "eps_r", eps)
        object.__setattr__(self, "mu_r", mu)

    @classmethod
    def vacuum(cls) -> "Medium":
        return cls(np.eye(3), np.eye(3))

    def tensors(self, formulation: Formulation):
        """``(curl tensor, mass tensor)`` for a formulation.

        The H-field system uses ``inv(eps_r)`` in the curl-curl term and
        ``mu_r`` in the mass and constraint terms; E-field (and naive) swap
        the roles.
        """
        if Formulation.parse(formulation) is Formulation.HFIELD:
            return invert_tensor(self.eps_r), self.mu_r
        return invert_tensor(self.mu_r), self.eps_r


def _grads_and_volumes(P):
    """Barycentric gradients ``(T, 4, 3)`` and volumes ``(T,)`` for a batch."""
    P = np.asarray(P, dtype=float)
    J = P[:, 1:] - P[:, :1]            # rows are edge vectors from vertex 0
    det = np.linalg.det(J)
    vol = det / 6.0
    scale = np.max(np.linalg.norm(J, axis=2), axis=1) ** 3
    if np.any(np.abs(vol) <= 1e-14 * scale):
        bad = int(np.argmin(np.abs(vol) / scale))
        raise MeshError(f"degenerate tetrahedron {bad} (volume {vol[bad]:.3e})")
    # grad(lambda_{1..3}) are the columns of inv(J)
    Jinv = np.linalg.inv(J)
    G = np.empty(P.shape)
    G[:, 1:] = np.swapaxes(Jinv, 1, 2)
    G[:, 0] = -G[:, 1:].sum(axis=1)
    return G, np.abs(vol)


def barycentric_gradients(tet_coords) -> np.ndarray:
    """Constant gradients of the 4 barycentric coordinates of one tet."""
    G, _ = _grads_and_volumes(np.asarray(tet_coords, dtype=float)[None])
    return G[0]


def _curls(G):
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    return 2.0 * np.cross(G[:, i], G[:, j])


def _whitney(G, bary):
    """Whitney functions at barycentric points: ``(T, Q, 6, 3)``."""
    i, j = LOCAL_EDGES[:, 0], LOCAL_EDGES[:, 1]
    Li = bary[:, i][None, :, :, None]
    Lj = bary[:, j][None, :, :, None]
    return Li * G[:, None, j] - Lj * G[:, None, i]


def edge_basis(tet_coords, edge_local: int, point, sign: int = 1) -> np.ndarray:
    """Value of local edge function ``edge_local`` at a barycentric point."""
    G = barycentric_gradients(tet_coords)
    bary = np.asarray(point, dtype=float).reshape(1, 4)
    return sign * _whitney(G[None], bary)[0, 0, edge_local]


def edge_curl(tet_coords, edge_local: int, sign: int = 1) -> np.ndarray:
    """Constant curl ``2 grad(lambda_i) x grad(lambda_j)`` of a local edge function."""
    G = barycentric_gradients(tet_coords)
    return sign * _curls(G[None])[0, edge_local]


@dataclass(frozen=True)
class ElementMatrices:
    A: np.ndarray  # (6, 6) curl-curl
    D: np.ndarray  # (6, 6) vector mass
    B: np.ndarray | None  # (6, 4) gradient coupling, rows = edge test functions
    C: np.ndarray | None  # (4, 6) divergence constraint, rows = nodal test functions


def batch_matrices(P, curl_tensors, mass_tensors, rule: QuadratureRule = DEGREE2,
                   with_constraint: bool = True):
    """Local matrices for a batch of tets, in local (unsigned) edge orientation.

    ``curl_tensors`` and ``mass_tensors`` are ``(T, 3, 3)`` or ``(3, 3)``.
    Returns ``(A, D, B, C)`` with leading batch axis; ``B`` and ``C`` are
    ``None`` when ``with_constraint`` is false.
    """
    G, vol = _grads_and_volumes(P)
    T = len(G)
    Tc = np.broadcast_to(np.asarray(curl_tensors, dtype=complex), (T, 3, 3))
    Tm = np.broadcast_to(np.asarray(mass_tensors, dtype=complex), (T, 3, 3))

    curls = _curls(G)                                   # (T, 6, 3)
    A = vol[:, None, None] * np.einsum(
        "tab,tkb,tia->tik", Tc, curls, curls, optimize=True
    )
    W = _whitney(G, rule.points)                        # (T, Q, 6, 3)
    TW = np.einsum("tab,tqkb->tqka", Tm, W, optimize=True)
    wv = vol[:, None] * rule.weights[None, :]           # (T, Q)
    D = np.einsum("tq,tqka,tqia->tik", wv, TW, W, optimize=True)
    if not with_constraint:
        return A, D, None, None
    B = np.einsum("tq,tja,tqia->tij", wv, G, W, optimize=True)
    C = np.einsum("tq,tqka,tja->tjk", wv, TW, G, optimize=True)
    return A, D, B, C


def local_matrices(tet_coords, medium: Medium, formulation) -> ElementMatrices:
    """Element matrices of one tet for a formulation.

    ``NAIVE`` returns only ``A`` and ``D`` (``B`` and ``C`` are ``None``).
    """
    formulation = Formulation.parse(formulation)
    Tc, Tm = medium.tensors(formulation)
    A, D, B, C = batch_matrices(
        np.asarray(tet_coords, dtype=float)[None], Tc, Tm,
        with_constraint=formulation.mixed,
    )
    if B is None:
        return ElementMatrices(A[0], D[0], None, None)
    return ElementMatrices(A[0], D[0], B[0].astype(complex), C[0])


def interpolate_edge_field(vertices, tets, tet_edges, tet_edge_signs, edge_values,
                           point=(0.25, 0.25, 0.25, 0.25)) -> np.ndarray:
    """Field of edge coefficients at one barycentric point per tet, ``(T, 3)``.

    ``edge_values`` holds one coefficient per global edge; the default point
    is the centroid.
    """
    P = np.asarray(vertices, dtype=float)[np.asarray(tets)]
    G, _ = _grads_and_volumes(P)
    W = _whitney(G, np.asarray(point, dtype=float).reshape(1, 4))[:, 0]   # (T, 6, 3)
    coef = np.asarray(edge_values)[tet_edges] * tet_edge_signs               # (T, 6)
    return np.einsum("tk,tka->ta", coef, W)
