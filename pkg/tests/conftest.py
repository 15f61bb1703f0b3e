import numpy as np
import pytest

from cavity_eig import Medium


def cylinder_medium():
    eps = np.diag([2 + 1j, 2 + 1j, 2]).astype(complex)
    mu = np.array([[2 - 1j, 0.375j, 0], [0.375j, 2 - 1j, 0], [0, 0, 2]], dtype=complex)
    return Medium(eps, mu)


def torus_medium():
    skew = np.array([[0, 1, 1], [-1, 0, 1], [-1, -1, 0]])
    eps = (2 - 0.5j) * np.eye(3) + 0.25j * skew
    mu = np.diag([1 - 0.2j, 1 - 0.4j, 1 - 0.8j])
    return Medium(eps, mu)


@pytest.fixture
def cyl_medium():
    return cylinder_medium()


@pytest.fixture
def tor_medium():
    return torus_medium()


@pytest.fixture
def vacuum():
    return Medium.vacuum()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.REPORT):
        terminalreporter.write_line(mod.REPORT[key])
