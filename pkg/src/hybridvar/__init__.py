"""Solver and certification toolkit for a quadratic nonlocal variational
problem on the unit interval coupled to finitely many isolated nodes.

The package evaluates the hybrid interaction energy and its
continuous/interface/discrete decomposition, assembles and solves the
Galerkin system of the associated quadratic functional, and numerically
certifies the coercivity and Poincare-type inequalities that make the
problem well posed.
"""

from .analysis import (
    CoercivityConstants,
    EigenIterationError,
    PoincareEstimate,
    check_coercivity,
    check_interface_estimate,
    check_product_norm_lower,
    coercivity_constants,
    direct_energy_quadrature,
    energy_identity_residual,
    poincare_estimate,
)
from .assembly import AssembledSystem, assemble, assemble_load, dump_matrix, mass_matrix
from .domain import (
    EnergyBreakdown,
    Forcing,
    HybridDomain,
    HybridFunction,
    ProblemSpec,
    eval_continuous,
    make_domain,
    mu_integral,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
)
from .energy import (
    MeanStats,
    energy_cc,
    energy_cd,
    energy_dd,
    energy_total,
    hybrid_norm_sq,
    l2_mu_inner,
    l2_mu_norm_sq,
    mean_stats,
)
from .kernels import ACTIVE_BACKEND
from .quadrature import (
    GaussRule,
    KernelMoments,
    gagliardo_pair_integral,
    gauss_rule,
    kernel_moment,
    kernel_moments,
    smooth_integral,
)
from .solver import (
    FactorizationError,
    Solution,
    bilinear_form,
    evaluate_J,
    gradient_check,
    minimize_functional,
    solution_to_dict,
    solve,
    strong_residuals,
    weak_residual_vector,
)
from .two_node import ReducedAffineState, check_splitting, example_spec, reduced_solve

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "AssembledSystem",
    "CoercivityConstants",
    "EigenIterationError",
    "EnergyBreakdown",
    "FactorizationError",
    "Forcing",
    "GaussRule",
    "HybridDomain",
    "HybridFunction",
    "KernelMoments",
    "MeanStats",
    "PoincareEstimate",
    "ProblemSpec",
    "ReducedAffineState",
    "Solution",
    "__version__",
    "assemble",
    "assemble_load",
    "bilinear_form",
    "check_coercivity",
    "check_interface_estimate",
    "check_product_norm_lower",
    "check_splitting",
    "coercivity_constants",
    "direct_energy_quadrature",
    "dump_matrix",
    "energy_cc",
    "energy_cd",
    "energy_dd",
    "energy_identity_residual",
    "energy_total",
    "eval_continuous",
    "evaluate_J",
    "example_spec",
    "gagliardo_pair_integral",
    "gauss_rule",
    "gradient_check",
    "hybrid_norm_sq",
    "kernel_moment",
    "kernel_moments",
    "l2_mu_inner",
    "l2_mu_norm_sq",
    "make_domain",
    "mass_matrix",
    "mean_stats",
    "minimize_functional",
    "mu_integral",
    "poincare_estimate",
    "reduced_solve",
    "smooth_integral",
    "solution_to_dict",
    "solve",
    "spec_from_dict",
    "spec_from_json",
    "spec_to_dict",
    "spec_to_json",
    "strong_residuals",
    "weak_residual_vector",
]
