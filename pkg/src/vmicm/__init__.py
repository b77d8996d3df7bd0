"""Varying multi-index coefficients models: three-step penalized estimation,
variable selection, and the Monte Carlo study harness."""

from .basis import BasisSpec, BasisValue, eval_basis, eval_basis_derivative, \
    knot_order_grid, make_basis
from .model import Coefficients, Dataset, FittedModel, FunctionClassification, \
    LoadingVector, beta_to_phi, design_matrix, evaluate_fk, index_values, \
    jacobian_phi, phi_to_beta, predict
from .penalty import McpParams, group_firm_threshold, mcp_derivative, mcp_value, \
    scalar_firm_threshold
from .simulate import ScenarioConfig, StudyReport, TrueModel, gen_continuous, \
    gen_discrete, imse, mse_beta, oracle_percentage, run_study
from .solver import SolverConfig, fit, initial_estimates, oracle_fit, \
    step1_varying_selection, step2_constant_selection, step3_beta_update
from .tuning import BicTrace, LambdaGrid, TuningConfig, build_grid, \
    select_knots_order, select_lambda1, select_lambda2, select_lambda3

__version__ = "0.1.0"

__all__ = [
    "BasisSpec", "BasisValue", "eval_basis", "eval_basis_derivative",
    "knot_order_grid", "make_basis",
    "Coefficients", "Dataset", "FittedModel", "FunctionClassification",
    "LoadingVector", "beta_to_phi", "design_matrix", "evaluate_fk",
    "index_values", "jacobian_phi", "phi_to_beta", "predict",
    "McpParams", "group_firm_threshold", "mcp_derivative", "mcp_value",
    "scalar_firm_threshold",
    "ScenarioConfig", "StudyReport", "TrueModel", "gen_continuous",
    "gen_discrete", "imse", "mse_beta", "oracle_percentage", "run_study",
    "SolverConfig", "fit", "initial_estimates", "oracle_fit",
    "step1_varying_selection", "step2_constant_selection", "step3_beta_update",
    "BicTrace", "LambdaGrid", "TuningConfig", "build_grid",
    "select_knots_order", "select_lambda1", "select_lambda2", "select_lambda3",
]
