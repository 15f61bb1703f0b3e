import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_eig.analysis import (
    DUMMY_VIOLATION,
    MULTIPLY_CONNECTED_FLAG,
    PHYSICAL,
    SPURIOUS_DC,
    SPURIOUS_NONZERO,
    Geometry,
    Thresholds,
    TrackingError,
    _track,
    analytic_box_spectrum,
    classify,
    convergence_study,
    dummy_statistic,
    observed_order,
    relative_difference,
    solve,
    spurious_audit,
)
from cavity_eig.assembly import assemble
from cavity_eig.eigen import EigenPair, SolverConfig
from cavity_eig.fem_kernels import Medium
from cavity_eig.mesh import generate_box_mesh, generate_cylinder_mesh, generate_torus_mesh

TWO_PI_SQ = 2 * math.pi**2


def pair(lam, xi, zeta):
    return EigenPair(lam=lam, xi=np.asarray(xi, dtype=complex),
                     zeta=np.asarray(zeta, dtype=complex))


def test_analytic_unit_cube():
    spec = analytic_box_spectrum(1, 1, 1, 3)
    assert spec[0][0] == pytest.approx(TWO_PI_SQ)
    assert spec[0][1] == 3
    assert spec[1] == (pytest.approx(3 * math.pi**2), 2)
    with pytest.raises(ValueError):
        analytic_box_spectrum(1, 0, 1, 2)


def test_dummy_statistic_definitions():
    p = pair(1.0, [3.0, 4.0], [1e-3, -2e-3])
    assert dummy_statistic(p, "e") == pytest.approx(2e-3 / 5)
    q = pair(1.0, [3.0, 4.0], [2.0, 2.0, 2.0])
    assert dummy_statistic(q, "h") == 0.0
    assert dummy_statistic(q, "naive") == 0.0


@pytest.fixture(scope="module")
def box_e():
    return assemble(generate_box_mesh(1, 1, 1, 2, 2, 2), Medium.vacuum(), "e")


def test_classify_order(box_e):
    m, n = box_e.m, box_e.n
    xi = np.random.default_rng(0).standard_normal(m)
    assert classify(pair(1e-8, xi, np.zeros(n)), box_e).kind == SPURIOUS_DC
    big_zeta = np.zeros(n)
    big_zeta[0] = 1.0
    assert classify(pair(20.0, xi, big_zeta), box_e).kind == DUMMY_VIOLATION
    # a generic field is not weakly divergence free
    assert classify(pair(20.0, xi, np.zeros(n)), box_e).kind == SPURIOUS_NONZERO


def test_classify_dc_flag_on_torus():
    s = assemble(generate_torus_mesh(0.8, 0.4, 8, 6, 1), Medium.vacuum(), "h")
    c = classify(pair(0.0, np.ones(s.m), np.ones(s.n)), s)
    assert (c.kind, c.flag) == (SPURIOUS_DC, MULTIPLY_CONNECTED_FLAG)


def test_solve_report_physical_modes():
    mesh = generate_box_mesh(1, 1, 1, 3, 3, 3)
    rep = solve(mesh, Medium.vacuum(), "e", SolverConfig(shift=19, nev=4))
    assert rep.converged
    assert len(rep.physical()) == 4
    assert rep.dominant().lam.real == pytest.approx(TWO_PI_SQ, rel=0.15)
    assert set(rep.timing) == {"assemble", "factorize", "arnoldi", "total"}


complex_entries = st.complex_numbers(max_magnitude=0.3, allow_nan=False, allow_infinity=False)


@settings(max_examples=6, deadline=None)
@given(st.lists(complex_entries, min_size=6, max_size=6), st.sampled_from(["e", "h"]))
def test_dummy_invariants_random_lossy_media(entries, form):
    # diagonally dominant tensors with loss, arbitrary off-diagonal coupling
    eps = np.diag([2 - 0.5j, 2.5 - 0.2j, 3 - 1j]).astype(complex)
    mu = np.diag([1.5 - 0.3j, 1 - 0.1j, 2 - 0.4j]).astype(complex)
    eps[0, 1], eps[1, 2], eps[2, 0] = entries[:3]
    mu[1, 0], mu[2, 1], mu[0, 2] = entries[3:]
    mesh = generate_cylinder_mesh(0.2, 0.5, 6, 2, 3)
    rep = solve(mesh, Medium(eps, mu), form, SolverConfig(shift=30, nev=4))
    assert rep.physical()
    for md in rep.physical():
        assert md.classification.dummy_stat < 1e-6
        assert md.classification.divergence_residual < 1e-8


def test_observed_order_exact_power():
    hs = [0.4, 0.2, 0.1]
    vals = [5 + 3 * h**2 for h in hs]
    assert observed_order(hs, vals, reference=5) == pytest.approx(2.0)
    assert observed_order(hs, vals) == pytest.approx(2.0)
    assert math.isnan(observed_order(hs[:2], vals[:2]))


def test_track():
    assert _track(10.0, [9.0, 10.5, 30.0]) == (10.5, False)
    lam, amb = _track(10.0, [9.0, 11.0])
    assert amb
    assert _track(10.0, [10.2, 10.2 + 1e-12, 12])[1] is False
    with pytest.raises(TrackingError):
        _track(10.0, [20.0])


def test_relative_difference_reference_pairs():
    # fine-mesh E/H reference pairs for the cylinder and the torus
    cyl = relative_difference(24.2499 - 7.5594j, 24.2490 - 7.5585j)
    tor = relative_difference(1.0396 + 3.5060j, 1.0382 + 3.5049j)
    assert cyl == pytest.approx(5.0e-5, rel=0.02)
    assert tor == pytest.approx(4.9e-4, rel=0.02)


def test_study_needs_two_sizes():
    with pytest.raises(ValueError):
        convergence_study(Geometry("box", (1, 1, 1)), Medium.vacuum(), "e", [3])


def test_cube_study_small():
    t = convergence_study(Geometry("box", (1, 1, 1)), Medium.vacuum(), "e", [2, 3, 4],
                          SolverConfig(shift=19, nev=8), reference=TWO_PI_SQ,
                          target=TWO_PI_SQ, cluster=3)
    errs = [r.error for r in t.rows]
    assert errs == sorted(errs, reverse=True)
    assert t.order > 1.0


def test_geometry_counts():
    assert Geometry("box", (1, 0.5, 0.25)).counts(4) == (4, 2, 1)
    assert Geometry("cylinder", (0.2, 0.5)).counts(4) == (6, 4, 10)
    assert Geometry("box", (1, 1, 1)).counts((2, 3, 4)) == (2, 3, 4)
    with pytest.raises(ValueError):
        Geometry("sphere", (1,)).build(2)


def test_audit_box():
    mesh = generate_box_mesh(1, 0.8, 0.6, 3, 3, 2)
    a = spurious_audit(mesh, Medium.vacuum(), shift=1.0, nev=20)
    assert a.passed
    assert a.near_zero["naive"] >= 1
    assert a.near_zero["e"] == 0 and a.near_zero["h"] == 0


def test_audit_torus_flags_dc():
    mesh = generate_torus_mesh(0.8, 0.4, 8, 6, 1)
    a = spurious_audit(mesh, Medium.vacuum(), shift=1.0, nev=10)
    assert not a.simply_connected
    for f in ("e", "h"):
        assert a.flagged[f] == a.near_zero[f]
    assert a.passed


def test_thresholds_override():
    mesh = generate_box_mesh(1, 1, 1, 2, 2, 2)
    rep = solve(mesh, Medium.vacuum(), "e", SolverConfig(shift=19, nev=2),
                thresholds=Thresholds(dc=math.inf))
    assert all(md.kind == SPURIOUS_DC for md in rep.modes)
    assert not rep.physical()
    with pytest.raises(LookupError):
        rep.dominant()
    assert PHYSICAL not in {md.kind for md in rep.modes}
