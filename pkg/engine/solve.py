import logging
from typing import Optional, Sequence

import numpy as np

from engine.config import SimConfig
from engine.simulation import resolve_utility
from fiscal_core.tax_schedule import TaxSchedule, flat_schedule
from population.builder import build_population
from saez.economy import Economy, build_economy
from saez.solvers import (
    SolverReport,
    attach_reference,
    brute_force_coordinate_search,
    brute_force_flat_tax,
    iterated_grid_search,
    solve_piecewise_saez,
)


logger = logging.getLogger(__name__)


def stationary_economy(config: SimConfig, skills: Optional[Sequence[float]] = None) -> Economy:
    """
    The run's population as scripted rational workers
    """
    if skills is None:
        skills, _ = build_population(config.population, config.n_workers, config.seed)
    skills = np.asarray(skills, dtype=float)

    return build_economy(
        skills,
        resolve_utility(config, skills),
        labor_bounds=config.labor_bounds,
        weighting=config.saez.weighting,
        marginal_utility=config.saez.marginal_utility,
        reference_hours=config.population.reference_hours,
    )


def solve_saez(
    config: SimConfig, schedule: Optional[TaxSchedule] = None, economy: Optional[Economy] = None
) -> SolverReport:
    """
    Runs the configured solver from the run's initial schedule
    """
    saez = config.saez
    economy = economy or stationary_economy(config)
    schedule = schedule or config.initial_tax_schedule()
    logger.info("solving with %s over %d brackets", saez.method, schedule.n_brackets)

    if saez.method == "piecewise":
        report = solve_piecewise_saez(
            economy,
            schedule,
            dtau=saez.dtau,
            damping=saez.damping,
            max_iters=saez.max_iters,
            tolerance=saez.tolerance,
            elasticity_method=saez.elasticity_method,
        )
        if saez.report_gap:
            attach_reference(report, economy, saez.flat_grid_step, saez.max_workers)

        return report
    if saez.method == "grid":
        return iterated_grid_search(economy, schedule, saez.grid_offsets, saez.max_sweeps, saez.max_workers)

    if saez.method == "flat":
        report = SolverReport(method="flat_grid")
        tau, welfare = brute_force_flat_tax(economy, saez.flat_grid_step, saez.max_workers)
        report.visit(flat_schedule(tau), welfare)
    else:
        report = SolverReport(method="coordinate_grid")
        best, welfare = brute_force_coordinate_search(
            economy, schedule, saez.flat_grid_step, saez.max_sweeps, saez.max_workers
        )
        report.visit(best, welfare)
    report.iterations = 1
    report.converged = True

    return report
