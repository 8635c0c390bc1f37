from saez.bracket_stats import (
    SaezBracketStats,
    bracket_statistics,
    nonlinear_statistics,
    top_rate_statistics,
    weight_response,
)
from saez.economy import Economy, Outcome, WelfareWeights, build_economy, welfare_weights
from saez.elasticity import PerturbationRun, estimate_elasticity, perturbation_run, regression_elasticity
from saez.income_distribution import EmpiricalIncomeDist, pareto_parameter
from saez.solvers import (
    SolverReport,
    attach_reference,
    brute_force_coordinate_search,
    brute_force_flat_tax,
    grid_perturb_search,
    iterated_grid_search,
    saez_rate,
    solve_piecewise_saez,
    top_rate,
)
