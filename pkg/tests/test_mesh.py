import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_eig.mesh import (
    LOCAL_EDGES,
    Mesh,
    MeshError,
    classify_boundary,
    generate_box_mesh,
    generate_cylinder_mesh,
    generate_torus_mesh,
)

UNIT_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)


def face_multiplicities(mesh):
    faces = np.sort(mesh.tets[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]], axis=2)
    _, counts = np.unique(faces.reshape(-1, 3), axis=0, return_counts=True)
    return counts


def test_unit_cube_single_cell_counts():
    m = generate_box_mesh(1, 1, 1, 1, 1, 1)
    assert (m.n_vertices, m.n_edges, m.n_faces, m.n_tets) == (8, 19, 18, 6)
    assert m.euler_characteristic == 1
    assert len(m.boundary_faces) == 12
    assert len(m.boundary_vertices) == 8


def test_two_cell_box_volume():
    m = generate_box_mesh(2, 1, 1, 2, 1, 1)
    assert (m.n_vertices, m.n_tets) == (12, 12)
    assert m.volumes().sum() == pytest.approx(2.0, rel=1e-14)


def test_single_tet_all_faces_boundary():
    m = Mesh.from_arrays(UNIT_TET, [[0, 1, 2, 3]])
    assert (m.n_vertices, m.n_edges, m.n_tets) == (4, 6, 1)
    assert len(m.boundary_faces) == 4
    assert m.h == pytest.approx(math.sqrt(2))


def test_negative_tet_is_reoriented():
    m = Mesh.from_arrays(UNIT_TET, [[1, 0, 2, 3]])
    assert m.volumes()[0] > 0


def test_cylinder_one_ring():
    m = generate_cylinder_mesh(0.2, 0.5, 6, 1, 1)
    assert m.n_vertices == 14
    assert m.n_tets == 18  # 6 prisms x 3
    assert m.euler_characteristic == 1


def test_cylinder_volume_converges():
    m = generate_cylinder_mesh(0.2, 0.5, 48, 8, 12)
    exact = math.pi * 0.2**2 * 0.5
    vol = m.volumes().sum()
    assert vol < exact
    assert vol == pytest.approx(exact, rel=1e-2)


def test_cylinder_rim_on_circle():
    m = generate_cylinder_mesh(0.2, 0.5, 6, 3, 2)
    r = np.hypot(m.vertices[:, 0], m.vertices[:, 1])
    assert r.max() == pytest.approx(0.2, abs=1e-15)


def test_torus_topology():
    m = generate_torus_mesh(0.8, 0.4, 8, 6, 1)
    assert m.euler_characteristic == 0
    assert m.boundary_euler_characteristic == 0
    assert set(face_multiplicities(m)) <= {1, 2}
    assert not m.simply_connected


def test_torus_volume_pappus():
    m = generate_torus_mesh(0.8, 0.4, 32, 12, 3)
    exact = 2 * math.pi**2 * 0.8 * 0.4**2
    assert m.volumes().sum() == pytest.approx(exact, rel=2e-2)


@pytest.mark.parametrize("rho1, rho2", [(0.4, 0.8), (0.4, 0.4)])
def test_torus_radius_order_rejected(rho1, rho2):
    with pytest.raises(MeshError):
        generate_torus_mesh(rho1, rho2, 8, 6, 1)


@pytest.mark.parametrize("args", [(0, 1, 1, 1, 1, 1), (1, -1, 1, 1, 1, 1), (1, 1, 1, 0, 1, 1)])
def test_box_rejects_bad_input(args):
    with pytest.raises(MeshError):
        generate_box_mesh(*args)


def test_cylinder_rejects_too_few_sectors():
    with pytest.raises(MeshError):
        generate_cylinder_mesh(0.2, 0.5, 2, 1, 1)


def test_non_manifold_face_rejected():
    pts = np.vstack([UNIT_TET[:3], [[0, 0, 1], [0, 0, -1], [1, 1, 1]]])
    # three tets share face (0, 1, 2)
    with pytest.raises(MeshError):
        Mesh.from_arrays(pts, [[0, 1, 2, 3], [0, 2, 1, 4], [0, 1, 2, 5]])


def test_edge_orientation_and_signs():
    m = generate_cylinder_mesh(0.2, 0.5, 6, 2, 2)
    assert np.all(m.edges[:, 0] < m.edges[:, 1])
    a = m.tets[:, LOCAL_EDGES[:, 0]]
    b = m.tets[:, LOCAL_EDGES[:, 1]]
    assert np.array_equal(m.tet_edge_signs, np.where(a < b, 1, -1))
    # incidence points at the right global edge
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.array_equal(m.edges[m.tet_edges][..., 0], lo)
    assert np.array_equal(m.edges[m.tet_edges][..., 1], hi)


def test_h_is_longest_edge():
    m = generate_box_mesh(1, 2, 3, 1, 1, 1)
    assert m.h == pytest.approx(math.sqrt(14))


def test_classify_boundary_recomputes_same_sets():
    m = generate_torus_mesh(0.8, 0.4, 8, 6, 1)
    c = classify_boundary(m)
    assert np.array_equal(c.boundary_faces, m.boundary_faces)
    assert np.array_equal(c.boundary_edges, m.boundary_edges)


def test_dump_is_json():
    m = generate_box_mesh(1, 1, 1, 1, 1, 1)
    d = json.loads(m.dump())
    assert d["stats"]["euler_characteristic"] == 1
    assert len(d["tets"]) == 6


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 3), st.integers(1, 3), st.integers(1, 3),
    st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0),
)
def test_box_invariants(nx, ny, nz, a, b, c):
    m = generate_box_mesh(a, b, c, nx, ny, nz)
    assert m.euler_characteristic == 1
    assert m.n_tets == 6 * nx * ny * nz
    assert np.all(m.volumes() > 0)
    assert m.volumes().sum() == pytest.approx(a * b * c, rel=1e-12)
    assert set(face_multiplicities(m)) <= {1, 2}
    assert len(m.boundary_faces) == 4 * (nx * ny + ny * nz + nx * nz)


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 9), st.integers(1, 3), st.integers(1, 3))
def test_cylinder_invariants(n_az, n_rings, n_layers):
    m = generate_cylinder_mesh(0.2, 0.5, n_az, n_rings, n_layers)
    assert m.euler_characteristic == 1
    assert np.all(m.volumes() > 0)
    assert set(face_multiplicities(m)) <= {1, 2}


@settings(max_examples=10, deadline=None)
@given(st.integers(3, 12), st.integers(3, 7), st.integers(1, 2))
def test_torus_invariants(n_major, n_az, n_rings):
    m = generate_torus_mesh(0.8, 0.4, n_major, n_az, n_rings)
    assert m.euler_characteristic == 0
    assert m.boundary_euler_characteristic == 0
    assert set(face_multiplicities(m)) <= {1, 2}


@settings(max_examples=10, deadline=None)
@given(st.randoms(use_true_random=False))
def test_tet_order_does_not_change_topology(rnd):
    m = generate_box_mesh(1, 1, 1, 2, 2, 1)
    order = list(range(m.n_tets))
    rnd.shuffle(order)
    p = m.permuted(order)
    assert p.stats() == m.stats()
    assert np.array_equal(p.edges, m.edges)
