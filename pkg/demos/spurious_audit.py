"""Naive curl-curl against the mixed formulations near Lambda = 0."""

import numpy as np

from cavity_eig import Medium
from cavity_eig.analysis import spurious_audit
from cavity_eig.mesh import generate_box_mesh, generate_cylinder_mesh

EPS = np.diag([2 + 1j, 2 + 1j, 2])
MU = np.array([[2 - 1j, 0.375j, 0], [0.375j, 2 - 1j, 0], [0, 0, 2]])


def main():
    cases = {
        "box 1 x 0.8 x 0.6": (generate_box_mesh(1.0, 0.8, 0.6, 4, 3, 3), Medium.vacuum()),
        "lossy cylinder": (generate_cylinder_mesh(0.2, 0.5, 6, 2, 4), Medium(EPS, MU)),
    }
    for name, (mesh, medium) in cases.items():
        audit = spurious_audit(mesh, medium, shift=1.0, nev=20)
        print(f"{name}: |Lambda| < 1e-6 among 20 modes nearest 1")
        for form, count in audit.near_zero.items():
            print(f"  {form:<6} {count:3d}")
        print("  audit", "passed" if audit.passed else "FAILED")


if __name__ == "__main__":
    main()
