import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from fiscal_core.tax_schedule import TaxSchedule, flat_schedule
from saez.bracket_stats import bracket_statistics, top_rate_statistics, weight_response
from saez.economy import Economy, welfare_weights
from saez.elasticity import DEFAULT_DTAU, estimate_elasticity, perturbation_run, regression_elasticity
from utils import RATE_MAX, RATE_MIN


logger = logging.getLogger(__name__)

DEFAULT_OFFSETS = (-20, -10, -5, -2, -1, 0, 1, 2, 5, 10, 20)
ELASTICITY_METHODS = ("perturbation", "regression")


def saez_rate(
    G: float,
    alpha: float,
    e: float,
    rate_min: float = RATE_MIN,
    rate_max: float = RATE_MAX,
    weight_response: float = 0.0,
) -> float:
    """
    (1 - G) / (1 - G + alpha e), clamped. A nonzero weight_response W adds
    W e to the numerator: the first-order condition when the welfare weights
    are 1/z of the incomes the rate itself moves
    """
    if not all(math.isfinite(v) for v in (G, alpha, e, weight_response)):
        raise ValueError(f"G, alpha, e and W must be finite, got {(G, alpha, e, weight_response)}")
    denominator = 1 - G + alpha * e
    if denominator == 0:
        raise ValueError("1 - G + alpha * e is zero")

    return float(np.clip((1 - G + weight_response * e) / denominator, rate_min, rate_max))


def top_rate(
    incomes: Sequence[float], weights, z_star: float, e: float, rate_min: float = RATE_MIN, rate_max: float = RATE_MAX
) -> Optional[float]:
    stats = top_rate_statistics(incomes, weights, z_star)
    if stats is None:
        return None

    return saez_rate(stats.G, stats.alpha, e, rate_min, rate_max)


def evaluate_schedules(economy: Economy, schedules: Sequence[TaxSchedule], max_workers: int = 1) -> list[float]:
    """
    Welfare of each candidate, in candidate order
    """
    if max_workers <= 1:
        return [economy.evaluate(schedule) for schedule in schedules]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(economy.evaluate, schedules))


@dataclass
class SolverReport:
    method: str
    schedules: list = field(default_factory=list)
    swf: list = field(default_factory=list)
    elasticities: list = field(default_factory=list)
    G: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    weight_response: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    best_schedule: Optional[TaxSchedule] = None
    best_swf: float = -np.inf
    reference_swf: Optional[float] = None

    @property
    def schedule(self) -> TaxSchedule:
        return self.best_schedule

    @property
    def swf_gap(self) -> Optional[float]:
        """
        Welfare the grid oracle still finds above the best schedule
        """
        if self.reference_swf is None:
            return None

        return self.reference_swf - self.best_swf

    def visit(self, schedule: TaxSchedule, swf: float) -> None:
        self.schedules.append(list(schedule.rates))
        self.swf.append(float(swf))
        if swf > self.best_swf:
            self.best_schedule, self.best_swf = schedule, float(swf)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "schedules": self.schedules,
            "swf": self.swf,
            "elasticities": self.elasticities,
            "G": self.G,
            "alpha": self.alpha,
            "weight_response": self.weight_response,
            "best_schedule": self.best_schedule.to_dict() if self.best_schedule else None,
            "best_swf": self.best_swf,
            "reference_swf": self.reference_swf,
            "swf_gap": self.swf_gap,
        }


def solve_piecewise_saez(
    economy: Economy,
    schedule_init: TaxSchedule,
    dtau: float = DEFAULT_DTAU,
    damping: float = 0.5,
    max_iters: int = 50,
    tolerance: float = 1e-3,
    elasticity_method: str = "perturbation",
) -> SolverReport:
    """
    Damped fixed-point iteration of the bracket-wise rate formula; the report
    carries the best-welfare schedule visited
    """
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if elasticity_method not in ELASTICITY_METHODS:
        raise ValueError(f"unknown elasticity method {elasticity_method!r}")

    report = SolverReport(method=f"piecewise_saez/{elasticity_method}")
    schedule = schedule_init
    for iteration in range(max_iters):
        outcome = economy.equilibrium(schedule)
        report.visit(schedule, outcome.welfare)
        weights = welfare_weights(outcome, economy)

        targets, elasticities, G, alpha, W = [], [], [], [], []
        for bracket in range(schedule.n_brackets):
            if elasticity_method == "perturbation":
                run = perturbation_run(economy, schedule, bracket, dtau, baseline=outcome)
                e = estimate_elasticity(run)
            else:
                e = regression_elasticity(economy, schedule, bracket)
            stats = bracket_statistics(outcome.pre_tax, weights, schedule, bracket, e)
            elasticities.append(e)
            G.append(stats.G if stats else None)
            alpha.append(stats.alpha if stats else None)
            if stats is None or e is None:
                W.append(None)
                targets.append(schedule.rates[bracket])
                continue
            W.append(weight_response(outcome, economy, schedule, bracket))
            targets.append(
                saez_rate(stats.G, stats.alpha, max(e, 0.0), schedule.rate_min, schedule.rate_max, W[-1])
            )

        report.elasticities.append(elasticities)
        report.G.append(G)
        report.alpha.append(alpha)
        report.weight_response.append(W)
        rates = (1 - damping) * np.asarray(schedule.rates) + damping * np.asarray(targets)
        change = float(np.max(np.abs(rates - np.asarray(schedule.rates))))
        report.iterations = iteration + 1
        logger.info(
            "saez iteration %d: welfare %.6g, rates %s, max change %.4f",
            iteration,
            outcome.welfare,
            np.round(schedule.rates, 4).tolist(),
            change,
        )
        schedule = schedule.with_rates(np.clip(rates, schedule.rate_min, schedule.rate_max).tolist())
        if change < tolerance:
            report.converged = True
            break

    report.visit(schedule, economy.evaluate(schedule))
    if not report.converged:
        logger.warning("saez iteration did not converge in %d iterations", max_iters)

    return report


def flat_grid(grid_step: float, rate_max: float = RATE_MAX) -> np.ndarray:
    """
    {0, step, 2 step, ...} up to rate_max
    """
    if not 0 < grid_step < 1:
        raise ValueError(f"grid_step must lie in (0, 1), got {grid_step}")
    count = int(math.floor(rate_max / grid_step + 1e-9))

    return np.round(np.arange(count + 1) * grid_step, 10)


def brute_force_flat_tax(
    economy: Economy, grid_step: float = 0.01, max_workers: int = 1
) -> tuple[float, float]:
    """
    Best flat rate on the grid; ties go to the smaller rate
    """
    grid = flat_grid(grid_step)
    values = evaluate_schedules(economy, [flat_schedule(float(tau)) for tau in grid], max_workers)
    best = int(np.argmax(values))

    return float(grid[best]), float(values[best])


def grid_perturb_search(
    schedule_init: TaxSchedule,
    economy: Economy,
    per_bracket_grid: Sequence[float] = DEFAULT_OFFSETS,
    max_workers: int = 1,
) -> TaxSchedule:
    """
    One coordinate sweep: each bracket in turn tries every offset (in
    percentage points) around its rate and keeps a strict improvement
    """
    if len(per_bracket_grid) == 0:
        raise ValueError("perturbation grid is empty")
    schedule = schedule_init
    current = economy.evaluate(schedule)

    for bracket in range(schedule.n_brackets):
        candidates = []
        for offset in per_bracket_grid:
            rates = list(schedule.rates)
            rates[bracket] = float(
                np.clip(round(rates[bracket] + offset / 100, 10), schedule.rate_min, schedule.rate_max)
            )
            candidates.append(schedule.with_rates(rates))
        for candidate, value in zip(candidates, evaluate_schedules(economy, candidates, max_workers)):
            if value > current:
                schedule, current = candidate, value

    return schedule


def iterated_grid_search(
    economy: Economy,
    schedule_init: TaxSchedule,
    per_bracket_grid: Sequence[float] = DEFAULT_OFFSETS,
    max_sweeps: int = 50,
    max_workers: int = 1,
) -> SolverReport:
    """
    Sweeps until a full sweep leaves the schedule unchanged
    """
    report = SolverReport(method="grid_perturb")
    schedule = schedule_init
    report.visit(schedule, economy.evaluate(schedule))
    for sweep in range(max_sweeps):
        updated = grid_perturb_search(schedule, economy, per_bracket_grid, max_workers)
        report.iterations = sweep + 1
        if updated.rates == schedule.rates:
            report.converged = True
            break
        schedule = updated
        report.visit(schedule, economy.evaluate(schedule))
        logger.info("grid sweep %d: welfare %.6g, rates %s", sweep, report.swf[-1], list(schedule.rates))

    return report


def brute_force_coordinate_search(
    economy: Economy,
    schedule_init: TaxSchedule,
    grid_step: float = 0.01,
    max_sweeps: int = 20,
    max_workers: int = 1,
) -> tuple[TaxSchedule, float]:
    """
    Coordinate-wise optimum over the absolute rate grid {0, step, ...}
    """
    grid = flat_grid(grid_step, schedule_init.rate_max)
    grid = grid[grid >= schedule_init.rate_min]
    schedule = schedule_init
    current = economy.evaluate(schedule)

    for sweep in range(max_sweeps):
        start = schedule.rates
        for bracket in range(schedule.n_brackets):
            candidates = []
            for tau in grid:
                rates = list(schedule.rates)
                rates[bracket] = float(tau)
                candidates.append(schedule.with_rates(rates))
            values = evaluate_schedules(economy, candidates, max_workers)
            best = int(np.argmax(values))
            if values[best] > current:
                schedule, current = candidates[best], values[best]
        if schedule.rates == start:
            break

    return schedule, float(current)


def attach_reference(
    report: SolverReport, economy: Economy, grid_step: float = 0.01, max_workers: int = 1
) -> SolverReport:
    """
    Runs the coordinate grid oracle from the report's best schedule and
    records its welfare, so the report carries the residual gap
    """
    _, reference = brute_force_coordinate_search(economy, report.best_schedule, grid_step, max_workers=max_workers)
    report.reference_swf = reference
    if report.swf_gap > 0:
        logger.info("%s leaves a welfare gap of %.6g to the grid oracle", report.method, report.swf_gap)

    return report
