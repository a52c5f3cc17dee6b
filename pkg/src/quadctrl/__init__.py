"""Grid solvers and Monte Carlo simulation for a two-dimensional singular
control problem with state constraints on the nonnegative quadrant.

The package solves two coupled variational problems on rectangular grids
(an obstacle problem for the stopping value, a gradient-constrained HJB
equation for the control value), extracts the free boundary separating the
pushing and no-action regions, simulates barrier-reflection policies, and
cross-checks everything against structural properties and an analytic 1D
oracle.  See the README for the command line interface.
"""

from .boundary import Boundary, BoundaryReport, check_boundary, extract_boundary
from .config import RunConfig, load_config
from .errors import (ConfigError, DegenerateModeError, MonotoneSchemeError,
                     NonConvergenceError)
from .fields import GridSpec, ScalarField, read_field_csv, write_field_csv
from .hjb import hjb_residual, push_active_cells, solve_control_value
from .model import (CostParams, ModelParams, TwoPieceCost, from_alpha_beta,
                    running_cost, stopping_payoff, validate)
from .paths import block_generator, sample_increments, simulate_z, skorokhod_1d
from .policy import (PolicySpec, SimResult, evaluate_policy, policy_tail_bound,
                     simulate_policy_path, step_policy)
from .stopping import (McStoppingEstimate, complementarity_residual,
                       mc_stopping_value, solve_stopping_value)
from .verify import (CheckRecord, SuiteReport, check_c1, check_convexity,
                     check_gradient_identity, check_lipschitz_growth,
                     check_monotone_gradients, oracle_1d_mean,
                     oracle_1d_resolvent, rbm_resolvent_mc, run_suite)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Boundary", "BoundaryReport", "check_boundary", "extract_boundary",
    "RunConfig", "load_config",
    "ConfigError", "DegenerateModeError", "MonotoneSchemeError",
    "NonConvergenceError",
    "GridSpec", "ScalarField", "read_field_csv", "write_field_csv",
    "hjb_residual", "push_active_cells", "solve_control_value",
    "CostParams", "ModelParams", "TwoPieceCost", "from_alpha_beta",
    "running_cost", "stopping_payoff", "validate",
    "block_generator", "sample_increments", "simulate_z", "skorokhod_1d",
    "PolicySpec", "SimResult", "evaluate_policy", "policy_tail_bound",
    "simulate_policy_path", "step_policy",
    "McStoppingEstimate", "complementarity_residual", "mc_stopping_value",
    "solve_stopping_value",
    "CheckRecord", "SuiteReport", "check_c1", "check_convexity",
    "check_gradient_identity", "check_lipschitz_growth",
    "check_monotone_gradients", "oracle_1d_mean", "oracle_1d_resolvent",
    "rbm_resolvent_mc", "run_suite",
]
