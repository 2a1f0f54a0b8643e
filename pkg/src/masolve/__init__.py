"""Numerical Monge-Ampere Dirichlet problems by minimizing a discrete energy
over discrete convex sets, with a conic interior-point solver."""

from .cases import CASE_NAMES, TestCase, discretize_measure, test_case
from .errors import MasolveError
from .grid import GradField, Mesh, MeshFunction, backward_gradient, build_mesh, diff, norms, sample
from .harness import (
    ConvergenceReport,
    ReportRow,
    check_monotone_theorem,
    check_variational_inequality,
    convergence_sweep,
    feasible_perturbations,
    run_case,
)
from .operators import (
    HessianField,
    PhiSpec,
    StencilSet,
    det_and_lambda_min,
    discrete_hessian,
    get_phi,
    is_locally_discrete_convex,
    is_wide_stencil_convex,
    j_h,
    monotone_ma,
    phi_eval,
    phi_grad,
    stencil_bases,
)
from .program import (
    ConicProgram,
    ProgramSpec,
    build_envelope_program,
    build_monotone_program,
    build_program,
    build_standard_program,
    canonicalize,
    epigraph_of_phi,
    is_feasible,
)
from .solver import SolveResult, SolveSettings, kkt_residuals, solve

__version__ = "0.1.0"
