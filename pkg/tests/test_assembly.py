import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from cavity_eig.assembly import (
    AssemblyError,
    assemble,
    build_dofmap,
    build_gevp,
    compute_beta,
    write_matrix_market,
)
from cavity_eig.fem_kernels import Formulation, Medium
from cavity_eig.mesh import generate_box_mesh, generate_cylinder_mesh, generate_torus_mesh


@pytest.fixture(scope="module")
def cell():
    return generate_box_mesh(1, 1, 1, 1, 1, 1)


@pytest.fixture(scope="module")
def box():
    return generate_box_mesh(1.0, 0.8, 0.6, 3, 2, 2)


def test_single_cell_h_dimensions(cell):
    s = assemble(cell, Medium.vacuum(), "h")
    assert (s.m, s.n) == (19, 8)
    g = build_gevp(s)
    assert g.size == 27 and g.gauge is not None


def test_single_cell_e_dimensions(cell):
    s = assemble(cell, Medium.vacuum(), "e")
    # only the body diagonal is interior, no interior vertex
    assert (s.m, s.n) == (1, 0)
    assert s.beta == 1.0
    g = build_gevp(s)
    assert (g.n, g.gauge) == (0, None)


def test_naive_dimensions(box):
    e = assemble(box, Medium.vacuum(), "e")
    nv = assemble(box, Medium.vacuum(), "naive")
    assert nv.m == e.m and nv.n == 0
    assert (nv.A != e.A).nnz == 0


def test_dofmaps_partition(box):
    for f in Formulation:
        d = build_dofmap(box, f)
        assert len(np.union1d(d.edge_dofs, d.constrained_edges)) == box.n_edges
        assert len(np.intersect1d(d.edge_dofs, d.constrained_edges)) == 0


@pytest.mark.parametrize("form", ["e", "h"])
def test_curl_curl_kills_gradients(box, form):
    eps = np.array([[2 + 1j, 0.2, 0], [0.1j, 3, 0], [0, 0, 1 - 0.5j]])
    s = assemble(box, Medium(eps, np.diag([1, 2, 3])), form)
    AG = s.A @ s.gradient
    assert abs(AG).max() <= 1e-12 * abs(s.A).max()


@pytest.mark.parametrize("form", ["e", "h"])
def test_constraint_is_gradient_of_mass(box, form):
    t = np.array([[2 - 1j, 0.375j, 0], [0.1, 2 - 1j, 0], [0, 0.3j, 2]])
    s = assemble(box, Medium(t, t.T + np.eye(3)), form)
    # row j of C tests the weighted field against grad(s_j)
    assert abs(s.C - s.gradient.T @ s.D).max() < 1e-13


@pytest.mark.parametrize("form", ["e", "h"])
def test_identity_media_give_transpose(box, form):
    s = assemble(box, Medium.vacuum(), form)
    assert abs(s.C - s.B.T).max() < 1e-14
    assert abs(s.B - s.D @ s.gradient).max() < 1e-14


def test_beta_definition(box):
    s = assemble(box, Medium(2.0, 1.0), "h")
    rho_a = np.abs(s.A).sum(axis=1).max()
    rho_b = np.abs(s.B).sum(axis=1).max()
    assert s.beta == pytest.approx(rho_a / rho_b, rel=1e-14)
    with pytest.raises(AssemblyError):
        compute_beta(s.A, sp.csr_matrix(s.B.shape))


def test_tet_order_gives_identical_matrices(box):
    med = Medium(np.diag([2 + 1j, 2 + 1j, 2]), np.diag([1, 2, 3 - 1j]))
    rng = np.random.default_rng(4)
    p = box.permuted(rng.permutation(box.n_tets))
    for f in "eh":
        a, b = assemble(box, med, f), assemble(p, med, f)
        for name in "ABCD":
            x, y = getattr(a, name).tocsr(), getattr(b, name).tocsr()
            x.sort_indices(), y.sort_indices()
            assert np.array_equal(x.indptr, y.indptr)
            assert np.array_equal(x.indices, y.indices)
            assert np.array_equal(x.data, y.data)  # bit-identical


def test_missing_region_medium(box):
    two = box.__class__.from_arrays(box.vertices, box.tets,
                                    region=np.arange(box.n_tets) % 2)
    with pytest.raises(AssemblyError, match=r"region\(s\) \[1\]"):
        assemble(two, {0: Medium.vacuum()}, "e")


def test_region_media_mapping():
    m = generate_box_mesh(1, 1, 1, 2, 1, 1)
    region = (m.vertices[m.tets].mean(axis=1)[:, 0] > 0.5).astype(int)
    m2 = m.__class__.from_arrays(m.vertices, m.tets, region=region)
    lo = assemble(m2, {0: Medium(1.0, 1.0), 1: Medium(4.0, 1.0)}, "e")
    hi = assemble(m2, {0: Medium(4.0, 1.0), 1: Medium(4.0, 1.0)}, "e")
    assert not np.allclose(lo.D.toarray(), hi.D.toarray())
    assert np.allclose(lo.A.toarray(), hi.A.toarray())


def test_lossless_hermitian():
    m = generate_cylinder_mesh(0.2, 0.5, 8, 2, 2)
    eps = np.array([[2, 0.5j, 0], [-0.5j, 2, 0], [0, 0, 3]])
    s = assemble(m, Medium(eps, np.eye(3)), "e")
    for X in (s.A, s.D):
        assert abs(X - X.conj().T).max() < 1e-13


def test_torus_h_has_all_dofs():
    m = generate_torus_mesh(0.8, 0.4, 8, 6, 1)
    s = assemble(m, Medium.vacuum(), "h")
    assert (s.m, s.n) == (m.n_edges, m.n_vertices)
    assert not s.simply_connected


def test_matrix_market_round_trip(tmp_path, box):
    s = assemble(box, Medium(np.diag([2 + 1j, 2, 2]), np.eye(3)), "h")
    paths = write_matrix_market(s, tmp_path / "mm")
    assert [p.rsplit("/", 1)[1] for p in paths] == ["A.mtx", "B.mtx", "C.mtx", "D.mtx"]
    for name, path in zip("ABCD", paths):
        back = sp.csr_matrix(scipy.io.mmread(path))
        ref = getattr(s, name)
        assert back.shape == ref.shape
        assert abs(back - ref).max() == 0.0
    assert "beta=" in open(paths[0]).read(400)
