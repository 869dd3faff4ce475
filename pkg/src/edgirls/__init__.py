"""Gram-matrix completion from partial pairwise distances with MatrixIRLS."""

from .basis import (IndexPair, SampleSet, apply_A, apply_A_star, apply_AA_star, apply_Q_omega,
                    coherence, dual_basis_element, primal_basis_element, read_samples,
                    solve_AA_star, write_samples)
from .dataio import (InstanceSpec, dof, gen_gaussian, gen_ill_conditioned, load_latlong_csv,
                     load_pdb_atoms, make_points, observe, oversampling_to_m, sample_pairs)
from .errors import EDGError
from .geometry import (PointCloud, classical_mds, edm, gram, points_from_gram,
                       procrustes_distance, success)
from .irls import IrlsConfig, IrlsResult, ImplicitGram, matrix_irls
from .linalg import UNSET, LinOp, SpectralState, cg_solve, truncated_eig
from .tangent import TangentCoeffs

__version__ = "0.1.0"

__all__ = [
    "IndexPair", "SampleSet", "apply_A", "apply_A_star", "apply_AA_star", "apply_Q_omega",
    "coherence", "dual_basis_element", "primal_basis_element", "read_samples", "solve_AA_star",
    "write_samples", "InstanceSpec", "dof", "gen_gaussian", "gen_ill_conditioned",
    "load_latlong_csv", "load_pdb_atoms", "make_points", "observe", "oversampling_to_m",
    "sample_pairs", "EDGError", "PointCloud", "classical_mds", "edm", "gram",
    "points_from_gram", "procrustes_distance", "success", "IrlsConfig", "IrlsResult",
    "ImplicitGram", "matrix_irls", "UNSET", "LinOp", "SpectralState", "cg_solve",
    "truncated_eig", "TangentCoeffs",
]
