"""Lossy anisotropic cylinder: E- and H-field eigenvalue against mesh size."""

import sys

import numpy as np

from cavity_eig import Medium, SolverConfig
from cavity_eig.analysis import Geometry, relative_difference, solve

EPS = np.diag([2 + 1j, 2 + 1j, 2])
MU = np.array([[2 - 1j, 0.375j, 0], [0.375j, 2 - 1j, 0], [0, 0, 2]])
REFERENCE = 24.2499 - 7.5594j


def fmt(z):
    return f"{z.real:.4f}{z.imag:+.4f}j"


def main(levels):
    geo = Geometry("cylinder", (0.2, 0.5))
    medium = Medium(EPS, MU)
    cfg = SolverConfig(shift=24.25 - 7.56j, nev=6)
    print(f"{'h':>7} {'Lambda_h (E)':>22} {'Lambda_h (H)':>22} {'E/H gap':>8} "
          f"{'t_E':>6} {'t_H':>6}")
    for level in levels:
        mesh = geo.build(level)
        out = {}
        for form in ("e", "h"):
            rep = solve(mesh, medium, form, cfg)
            out[form] = (rep.dominant(REFERENCE).lam, rep.timing["total"])
        (le, te), (lh, th) = out["e"], out["h"]
        print(f"{mesh.h:7.4f} {fmt(le):>22} {fmt(lh):>22} "
              f"{relative_difference(le, lh):8.1e} {te:6.1f} {th:6.1f}")
    print(f"reference at h = 0.043: {REFERENCE}")


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [4, 6])
