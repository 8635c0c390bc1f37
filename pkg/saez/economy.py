import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from agents.best_response import best_response_labor, check_labor_bounds
from fiscal_core.tax_schedule import TaxSchedule, tax_due_vector
from fiscal_core.utility import UtilityParams, isoelastic_utility, marginal_consumption_utility
from fiscal_core.welfare import social_welfare
from utils import INCOME_FLOOR, LABOR_BOUNDS, REFERENCE_HOURS


logger = logging.getLogger(__name__)

WEIGHTINGS = ("anchor", "current")
REBATES = ("balanced", "fixed")


@dataclass(frozen=True, eq=False)
class Outcome:
    """
    Stationary response of an economy to one schedule
    """

    schedule: TaxSchedule
    labor: np.ndarray
    pre_tax: np.ndarray
    post_tax: np.ndarray
    rebate: float
    utilities: np.ndarray
    swf: float
    welfare: float
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class Economy:
    """
    Scripted workers facing a schedule. `fixed_labor` makes workers perfectly
    inelastic. `weighting` picks the welfare objective: "current" is the SWF
    the simulation logs, utilities over realised incomes; "anchor" freezes the
    1/z weights at skill * reference_hours. `marginal_utility` multiplies the
    solver weights g_i by du/dc
    """

    skills: np.ndarray
    params: UtilityParams
    labor_bounds: tuple = LABOR_BOUNDS
    fixed_labor: Optional[np.ndarray] = None
    weighting: str = "current"
    marginal_utility: bool = False
    reference_hours: float = REFERENCE_HOURS
    rebate_xtol: float = 1e-9
    equilibria: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        skills = np.asarray(self.skills, dtype=float)
        if skills.ndim != 1 or skills.size == 0:
            raise ValueError("economy needs a nonempty skill vector")
        if np.any(skills < 0):
            raise ValueError("skills must be nonnegative")
        object.__setattr__(self, "skills", skills)
        object.__setattr__(self, "labor_bounds", check_labor_bounds(self.labor_bounds))
        if self.fixed_labor is not None:
            fixed = np.asarray(self.fixed_labor, dtype=float)
            if fixed.shape != skills.shape:
                raise ValueError("fixed_labor needs one entry per worker")
            object.__setattr__(self, "fixed_labor", np.clip(fixed, *self.labor_bounds))
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}, expected one of {WEIGHTINGS}")

    @property
    def n_workers(self) -> int:
        return self.skills.size

    @property
    def anchor_weights(self) -> np.ndarray:
        return 1 / np.maximum(self.skills * self.reference_hours, INCOME_FLOOR)

    def labor_response(self, schedule: TaxSchedule, rebate: float) -> np.ndarray:
        if self.fixed_labor is not None:
            return self.fixed_labor.copy()

        return best_response_labor(self.skills, schedule, rebate, self.params, self.labor_bounds)

    def mean_tax(self, schedule: TaxSchedule, rebate: float) -> float:
        z = self.skills * self.labor_response(schedule, rebate)
        return float(tax_due_vector(schedule, z).mean())

    def balanced_rebate(self, schedule: TaxSchedule) -> tuple[float, int]:
        """
        Rebate R with R = mean tax of the incomes chosen under R. Revenue
        falls as R rises, so the root lies in [0, revenue at R = 0]
        """
        upper = self.mean_tax(schedule, 0.0)
        if upper <= 0:
            return 0.0, 1
        gap = self.mean_tax(schedule, upper) - upper
        if gap >= 0:
            return upper, 2
        rebate, result = brentq(
            lambda r: self.mean_tax(schedule, r) - r,
            0.0,
            upper,
            xtol=self.rebate_xtol * max(upper, 1.0),
            rtol=4 * np.finfo(float).eps,
            full_output=True,
        )

        return float(rebate), int(result.function_calls) + 2

    def welfare_of(self, pre_tax: np.ndarray, utilities: np.ndarray) -> float:
        if self.weighting == "anchor":
            return float(np.sum(self.anchor_weights * utilities))

        return social_welfare(pre_tax, utilities)

    def outcome(self, schedule: TaxSchedule, rebate: float, iterations: int = 0) -> Outcome:
        labor = self.labor_response(schedule, rebate)
        pre_tax = self.skills * labor
        post_tax = pre_tax - tax_due_vector(schedule, pre_tax) + rebate
        utilities = isoelastic_utility(post_tax, labor, self.params)

        return Outcome(
            schedule=schedule,
            labor=labor,
            pre_tax=pre_tax,
            post_tax=post_tax,
            rebate=float(rebate),
            utilities=utilities,
            swf=social_welfare(pre_tax, utilities),
            welfare=self.welfare_of(pre_tax, utilities),
            iterations=iterations,
        )

    def equilibrium(self, schedule: TaxSchedule, rebate: Optional[float] = None) -> Outcome:
        """
        Stationary outcome with the budget-balancing rebate, or with the
        rebate held at a given value
        """
        if rebate is not None:
            return self.outcome(schedule, rebate)
        key = (schedule.thresholds, schedule.rates)
        if key not in self.equilibria:
            balanced, iterations = self.balanced_rebate(schedule)
            self.equilibria[key] = self.outcome(schedule, balanced, iterations)

        return self.equilibria[key]

    def evaluate(self, schedule: TaxSchedule) -> float:
        """
        Objective of the solvers; with "current" weighting this is Outcome.swf
        """
        return self.equilibrium(schedule).welfare


@dataclass(frozen=True, eq=False)
class WelfareWeights:
    g: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.g, dtype=float)
        if np.any(g < 0) or not np.any(g > 0):
            raise ValueError("welfare weights must be nonnegative and not all zero")
        object.__setattr__(self, "g", g)


def objective_weights(outcome: Outcome, economy: Economy) -> np.ndarray:
    if economy.weighting == "anchor":
        return economy.anchor_weights

    return 1 / np.maximum(outcome.pre_tax, INCOME_FLOOR)


def welfare_weights(outcome: Outcome, economy: Economy) -> WelfareWeights:
    """
    g_i = 1 / max(z_i, floor), or the frozen anchor weight; times du_i/dc_i
    when the economy asks for marginal utilities
    """
    g = objective_weights(outcome, economy)
    if economy.marginal_utility:
        g = g * marginal_consumption_utility(outcome.post_tax, economy.params)

    return WelfareWeights(g=g)


def rebate_dollar_value(outcome: Outcome, economy: Economy) -> float:
    """
    Objective gained when every worker receives one more dollar
    """
    omega = objective_weights(outcome, economy)

    return float(np.sum(omega * marginal_consumption_utility(outcome.post_tax, economy.params)))


def build_economy(
    skills: Sequence[float],
    params: UtilityParams,
    labor_bounds: Sequence[float] = LABOR_BOUNDS,
    weighting: str = "current",
    marginal_utility: bool = False,
    fixed_labor: Optional[Sequence[float]] = None,
    reference_hours: float = REFERENCE_HOURS,
) -> Economy:
    economy = Economy(
        skills=np.asarray(skills, dtype=float),
        params=params,
        labor_bounds=tuple(labor_bounds),
        fixed_labor=None if fixed_labor is None else np.asarray(fixed_labor, dtype=float),
        weighting=weighting,
        marginal_utility=marginal_utility,
        reference_hours=reference_hours,
    )
    logger.debug("economy of %d workers, %s weighting", economy.n_workers, weighting)

    return economy
