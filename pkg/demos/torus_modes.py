"""Lossy anisotropic solid torus: the lowest modes and the dc audit.

The torus is multiply connected, so a near-zero eigenvalue may be a genuine
static field; such modes are flagged rather than counted as spurious.
"""

import sys

import numpy as np

from cavity_eig import Medium, SolverConfig
from cavity_eig.analysis import Geometry, solve, spurious_audit

SKEW = np.array([[0, 1, 1], [-1, 0, 1], [-1, -1, 0]])
EPS = (2 - 0.5j) * np.eye(3) + 0.25j * SKEW
MU = np.diag([1 - 0.2j, 1 - 0.4j, 1 - 0.8j])


def main(level):
    mesh = Geometry("torus", (0.8, 0.4)).build(level)
    medium = Medium(EPS, MU)
    print(f"h = {mesh.h:.4f} m, Euler characteristic {mesh.euler_characteristic}")
    for form in ("e", "h"):
        rep = solve(mesh, medium, form, SolverConfig(shift=1 + 3.5j, nev=6))
        print(f"{form.upper()}-field modes nearest 1+3.5j:")
        for md in rep.modes:
            flag = f"  ({md.classification.flag})" if md.classification.flag else ""
            print(f"  {md.lam.real:9.4f}{md.lam.imag:+9.4f}j  {md.kind}{flag}")
    audit = spurious_audit(mesh, medium, shift=1.0, nev=10)
    print("near-zero eigenvalues:", audit.near_zero, "flagged:", audit.flagged)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
