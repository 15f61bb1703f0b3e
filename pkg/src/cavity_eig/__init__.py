"""Spurious-free mixed finite element eigensolver for 3-D cavities.

Cavities may be filled with electrically and magnetically lossy, anisotropic
media (non-Hermitian permittivity and permeability tensors).  Both the
E-field and the H-field systems are augmented with a scalar dummy variable
that enforces the divergence condition weakly, so no spurious dc modes
appear.  A plain curl-curl ("naive") formulation is included for comparison.

Typical use::

    from cavity_eig import Medium, SolverConfig, generate_cylinder_mesh, solve

    mesh = generate_cylinder_mesh(0.2, 0.5, 6, 6, 15)
    report = solve(mesh, Medium.vacuum(), "e", SolverConfig(shift=60.0))
    print(report.dominant().lam)
"""

__version__ = "0.1.0"

from .analysis import (
    Geometry,
    SolveReport,
    Thresholds,
    analytic_box_spectrum,
    classify,
    convergence_study,
    e_h_cross_check,
    observed_order,
    solve,
    spurious_audit,
)
from .assembly import BlockSystem, assemble, build_dofmap, build_gevp, compute_beta
from .eigen import (
    EigenPair,
    SolverConfig,
    dense_qz_oracle,
    factorize,
    shift_invert_arnoldi,
)
from .fem_kernels import Formulation, Medium, invert_tensor, local_matrices
from .gmsh import read_gmsh, read_gmsh_file
from .mesh import (
    Mesh,
    MeshError,
    classify_boundary,
    generate_box_mesh,
    generate_cylinder_mesh,
    generate_torus_mesh,
)
from .results import ResultsFile

__all__ = [
    "BlockSystem",
    "EigenPair",
    "Formulation",
    "Geometry",
    "Medium",
    "Mesh",
    "MeshError",
    "ResultsFile",
    "SolveReport",
    "SolverConfig",
    "Thresholds",
    "analytic_box_spectrum",
    "assemble",
    "build_dofmap",
    "build_gevp",
    "classify",
    "classify_boundary",
    "compute_beta",
    "convergence_study",
    "dense_qz_oracle",
    "e_h_cross_check",
    "factorize",
    "generate_box_mesh",
    "generate_cylinder_mesh",
    "generate_torus_mesh",
    "invert_tensor",
    "local_matrices",
    "observed_order",
    "read_gmsh",
    "read_gmsh_file",
    "shift_invert_arnoldi",
    "solve",
    "spurious_audit",
]
