"""Principal half-eigenvalues, minimizing measures and resonance for Bellman operators."""

__version__ = "0.1.0"

from .adjoint import (MeasureSet, MinimizingMeasure, adjoint_eigenfunction, linearize_at,
                      measure_set, minimax_certificate, refined_limit, solvability_functional)
from .dirichlet import (SolveOptions, SolveResult, abp_ratio, solve_bellman_dirichlet,
                        solve_linear_dirichlet, verify_comparison)
from .eigen import (EigenOptions, EigenResult, blowup_estimate, principal_half_eigen_minus,
                    principal_half_eigen_plus)
from .expr import ExprError, parse_expr
from .mesh import build_grid, disk, integrate, interval, lp_norm, rectangle, sup_norm
from .operator import (BellmanOperator, EllipticityParams, check_hypotheses, dual, eval_bellman,
                       eval_linear, example_4_2, example_4_3, linear_operator, pucci_minus,
                       pucci_plus)
from .resonance import ResonanceOptions, ResonanceVerdict, solve_at_resonance, t_star

__all__ = [
    "BellmanOperator", "EigenOptions", "EigenResult", "EllipticityParams", "ExprError",
    "MeasureSet", "MinimizingMeasure", "ResonanceOptions", "ResonanceVerdict", "SolveOptions",
    "SolveResult", "abp_ratio", "adjoint_eigenfunction", "blowup_estimate", "build_grid",
    "check_hypotheses", "disk", "dual", "eval_bellman", "eval_linear", "example_4_2",
    "example_4_3", "integrate", "interval", "linear_operator", "linearize_at", "lp_norm",
    "measure_set", "minimax_certificate", "parse_expr", "principal_half_eigen_minus",
    "principal_half_eigen_plus", "pucci_minus", "pucci_plus", "rectangle", "refined_limit",
    "solvability_functional", "solve_at_resonance", "solve_bellman_dirichlet",
    "solve_linear_dirichlet", "sup_norm", "t_star", "verify_comparison",
]
