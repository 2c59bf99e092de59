"""Frequency-domain Biot poroelasticity with stabilized equal-order elements."""

__version__ = "0.1.0"

from .mesh import (Mesh, GeomCache, MeshError, build_geometry,
                   generate_unit_square, generate_unit_cube, read_gmsh,
                   mesh_statistics)
from .fem import (QuadratureRule, ReferenceElement, DofMap, quadrature_rule,
                  build_dofmap)
from .linalg import (ComplexCsrMatrix, SolveReport, SingularMatrixError,
                     csr_from_triplets, spmv, direct_solve, gmres, ilu0,
                     dense_generalized_eig, write_matrix_market)
from .forms import (MaterialParams, StabilizationParams, BoundarySpec,
                    BiotSystem, derive_coefficients, boundary_spec,
                    assemble_operator, assemble_load, apply_dirichlet,
                    dirichlet_constraints)
from .manufactured import (ExactSolution, manufactured_2d, manufactured_3d,
                           manufactured_boundary)
from .verification import (ErrorReport, SpectrumReport, compute_error,
                           convergence_study, kappa_sweep, nu_sweep,
                           layered_experiment, elasticity_spectrum,
                           infsup_estimate, solve_case, solve_manufactured)

__all__ = [
    "Mesh", "GeomCache", "MeshError", "build_geometry",
    "generate_unit_square", "generate_unit_cube", "read_gmsh", "mesh_statistics",
    "QuadratureRule", "ReferenceElement", "DofMap", "quadrature_rule",
    "build_dofmap",
    "ComplexCsrMatrix", "SolveReport", "SingularMatrixError",
    "csr_from_triplets", "spmv", "direct_solve", "gmres", "ilu0",
    "dense_generalized_eig", "write_matrix_market",
    "MaterialParams", "StabilizationParams", "BoundarySpec", "BiotSystem",
    "derive_coefficients", "boundary_spec", "assemble_operator",
    "assemble_load", "apply_dirichlet", "dirichlet_constraints",
    "ExactSolution", "manufactured_2d", "manufactured_3d",
    "manufactured_boundary",
    "ErrorReport", "SpectrumReport", "compute_error", "convergence_study",
    "kappa_sweep", "nu_sweep", "layered_experiment", "elasticity_spectrum",
    "infsup_estimate", "solve_case", "solve_manufactured",
]
