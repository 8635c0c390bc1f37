import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from fiscal_core.tax_schedule import TaxSchedule
from saez.economy import REBATES, Economy, Outcome


logger = logging.getLogger(__name__)

DEFAULT_DTAU = 0.01


@dataclass(frozen=True, eq=False)
class PerturbationRun:
    """
    Converged incomes under a schedule and under the same schedule with one
    bracket rate shifted by dtau
    """

    baseline_schedule: TaxSchedule
    baseline_incomes: np.ndarray
    perturbed_schedule: TaxSchedule
    perturbed_incomes: np.ndarray
    dtau: float
    bracket: int

    def __post_init__(self) -> None:
        if self.baseline_schedule.thresholds != self.perturbed_schedule.thresholds:
            raise ValueError("perturbation must keep the thresholds")
        shifts = np.asarray(self.perturbed_schedule.rates) - np.asarray(self.baseline_schedule.rates)
        others = np.delete(shifts, self.bracket)
        if np.any(np.abs(others) > 1e-12) or abs(shifts[self.bracket] - self.dtau) > 1e-9:
            raise ValueError(f"schedules must differ only in bracket {self.bracket}, by {self.dtau}")
        object.__setattr__(self, "baseline_incomes", np.asarray(self.baseline_incomes, dtype=float))
        object.__setattr__(self, "perturbed_incomes", np.asarray(self.perturbed_incomes, dtype=float))
        if self.baseline_incomes.shape != self.perturbed_incomes.shape:
            raise ValueError("baseline and perturbed incomes must cover the same workers")


def perturb_rate(schedule: TaxSchedule, bracket: int, dtau: float) -> tuple[TaxSchedule, float]:
    """
    Shifts one rate by dtau, flipping the sign when the shift would leave
    the admissible range
    """
    rate = schedule.rates[bracket]
    if not schedule.rate_min <= rate + dtau <= schedule.rate_max:
        dtau = -dtau
    rates = list(schedule.rates)
    rates[bracket] = rate + dtau

    return schedule.with_rates(rates), dtau


def perturbation_run(
    economy: Economy,
    schedule: TaxSchedule,
    bracket: int,
    dtau: float = DEFAULT_DTAU,
    rebate: str = "balanced",
    baseline: Optional[Outcome] = None,
) -> PerturbationRun:
    """
    "balanced" re-solves the rebate under the perturbed schedule (the total
    response); "fixed" holds it at its baseline value
    """
    if rebate not in REBATES:
        raise ValueError(f"unknown rebate mode {rebate!r}, expected one of {REBATES}")
    if dtau == 0:
        raise ValueError("dtau must be nonzero")
    baseline = baseline or economy.equilibrium(schedule)
    perturbed_schedule, dtau = perturb_rate(schedule, bracket, dtau)
    perturbed = economy.equilibrium(perturbed_schedule, None if rebate == "balanced" else baseline.rebate)

    return PerturbationRun(
        baseline_schedule=schedule,
        baseline_incomes=baseline.pre_tax,
        perturbed_schedule=perturbed_schedule,
        perturbed_incomes=perturbed.pre_tax,
        dtau=dtau,
        bracket=bracket,
    )


def bracket_members(schedule: TaxSchedule, incomes: np.ndarray, bracket: int) -> np.ndarray:
    lower, upper = schedule.bracket_bounds(bracket)
    return (incomes >= lower) & (incomes < upper)


def estimate_elasticity(run: PerturbationRun, bracket: Optional[int] = None) -> Optional[float]:
    """
    Log change of the mean income of the workers who started in the bracket
    over the log change of the net-of-tax rate; None for an empty bracket.
    Only the bracket the run perturbed has a defined elasticity
    """
    bracket = run.bracket if bracket is None else bracket
    if bracket != run.bracket:
        raise ValueError(f"run perturbs bracket {run.bracket}, not {bracket}")
    if run.dtau == 0:
        raise ValueError("dtau = 0 leaves the elasticity undefined")
    rate = run.baseline_schedule.rates[bracket]
    shifted = run.perturbed_schedule.rates[bracket]
    if shifted == rate:
        raise ValueError(f"bracket {bracket} rate was not shifted")
    if 1 - rate <= 0 or 1 - shifted <= 0:
        raise ValueError(f"net-of-tax rate must stay positive (rates {rate}, {shifted})")

    members = bracket_members(run.baseline_schedule, run.baseline_incomes, bracket)
    if not np.any(members):
        return None
    base_mean = run.baseline_incomes[members].mean()
    perturbed_mean = run.perturbed_incomes[members].mean()
    if base_mean <= 0 or perturbed_mean <= 0:
        return None

    return float((np.log(perturbed_mean) - np.log(base_mean)) / (np.log(1 - shifted) - np.log(1 - rate)))


def regression_elasticity(
    economy: Economy,
    schedule: TaxSchedule,
    bracket: int,
    dtaus: Sequence[float] = (-0.02, -0.01, 0.01, 0.02),
    rebate: str = "balanced",
) -> Optional[float]:
    """
    Slope of log mean bracket income on log net-of-tax rate across several
    perturbations of one rate
    """
    baseline = economy.equilibrium(schedule)
    members = bracket_members(schedule, baseline.pre_tax, bracket)
    if not np.any(members) or baseline.pre_tax[members].mean() <= 0:
        return None

    log_net, log_income = [np.log(1 - schedule.rates[bracket])], [np.log(baseline.pre_tax[members].mean())]
    for dtau in dtaus:
        run = perturbation_run(economy, schedule, bracket, dtau, rebate, baseline)
        mean_income = run.perturbed_incomes[members].mean()
        if mean_income <= 0:
            continue
        log_net.append(np.log(1 - run.perturbed_schedule.rates[bracket]))
        log_income.append(np.log(mean_income))
    if len(set(log_net)) < 2:
        return None
    slope, _ = np.polyfit(log_net, log_income, 1)

    return float(slope)
