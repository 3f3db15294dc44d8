"""Regular approximations of spectra of singular discrete Hamiltonian systems.

Layers, bottom up: :mod:`~hamspec.linalg` (dense complex kernels),
:mod:`~hamspec.model` (coefficients), :mod:`~hamspec.solutions` (fundamental
matrices and sums), :mod:`~hamspec.classify` (endpoint case),
:mod:`~hamspec.extensions` (boundary data), :mod:`~hamspec.spectral`
(resolvents, eigenvalues, bounds) and :mod:`~hamspec.cli`.
"""

__version__ = "0.1.0"

from .classify import (CaseKind, CaseLabel, ClassificationAmbiguous, DefinitenessNotFound,
                       NoSelfAdjointExtension, classify, count_l2_solutions, find_definiteness)
from .extensions import (InvalidBoundaryCondition, PsiBasis, RegularBC, SseDescriptor,
                         boundary_residual, build_psi_basis, default_intermediate_sse,
                         dirichlet_bc, induce_regular, lcc_identity, lpc_dirichlet, validate_sse)
from .linalg import (ContractViolation, SingularMatrix, det, diag_skew_hermitian, herm_eigen,
                     lu_factor, lu_solve, rank)
from .model import (AssumptionViolation, HamSequence, SystemCoefficients, apply_L, apply_R,
                    builtin, canonical_j, direct_sum, ex_lcc, ex_lpc, ex_mid, finite_support,
                    p_matrix, second_order, shifted, table_with_tail, validate)
from .solutions import (FundamentalMatrix, TailDivergence, TailSums, bform, fundamental,
                        lagrange_residual, solve_ivp, step, tail_quantities, transfer_U,
                        weighted_inner)
from .spectral import (ApproxOptions, ApproximationReport, EigenList, GreenData, ZIsEigenvalue,
                       approximate, eigen_oracle, eigenvalue_bounds, eigenvalues_regular,
                       error_bound, eta_bound, green_apply, green_kernel_regular,
                       green_kernel_singular, hs_tail_check, polish_eigenvalue,
                       regular_resolvent, resolvent_defect, singular_resolvent_lcc)
