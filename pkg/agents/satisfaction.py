from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from fiscal_core.tax_schedule import TaxSchedule, marginal_rate_vector, tax_due_vector
from population.personas import Persona


def satisfaction_flags(
    schedule: TaxSchedule,
    incomes: Union[Sequence[float], np.ndarray],
    max_effective_rates: Union[Sequence[float], np.ndarray],
    min_marginal_retentions: Union[Sequence[float], np.ndarray],
) -> np.ndarray:
    """
    1 where the worker keeps enough of the next dollar and pays a low enough
    effective rate, else 0
    """
    z = np.asarray(incomes, dtype=float)
    marginal = marginal_rate_vector(schedule, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        effective = np.where(z > 0, tax_due_vector(schedule, z) / np.where(z > 0, z, 1.0), 0.0)
    satisfied = ((1 - marginal) >= np.asarray(min_marginal_retentions)) & (
        effective <= np.asarray(max_effective_rates)
    )

    return satisfied.astype(int)


def satisfaction_flag_scripted(obs, persona: Persona, schedule: TaxSchedule) -> int:
    """
    Persona rule applied to a worker observation (the observation carries the
    marginal rate; the effective rate comes from the schedule)
    """
    if obs.pre_tax < 0:
        raise ValueError("pre-tax income must be nonnegative")
    retention = 1 - obs.marginal_rate_at_income
    effective = tax_due_vector(schedule, obs.pre_tax) / obs.pre_tax if obs.pre_tax > 0 else 0.0

    return int(retention >= persona.min_marginal_retention and effective <= persona.max_effective_rate)


@dataclass(frozen=True)
class SatisfactionVerdict:
    satisfied: int
    retention: float
    effective_rate: float

    def reasoning(self, persona: Persona) -> str:
        """
        Chain of thought in the style workers are asked to produce
        """
        keep = "meets" if self.retention >= persona.min_marginal_retention else "misses"
        cap = "within" if self.effective_rate <= persona.max_effective_rate else "above"
        verdict = "SATISFIED" if self.satisfied else "UNSATISFIED"

        return (
            f"I keep {self.retention:.0%} of the next dollar, which {keep} my "
            f"{persona.min_marginal_retention:.0%} target. My effective rate is about "
            f"{self.effective_rate:.0%}, {cap} my {persona.max_effective_rate:.0%} threshold. "
            f"Verdict: {verdict}"
        )


def scripted_verdict(pre_tax: float, persona: Persona, schedule: TaxSchedule) -> SatisfactionVerdict:
    retention = 1 - float(marginal_rate_vector(schedule, pre_tax))
    effective = float(tax_due_vector(schedule, pre_tax)) / pre_tax if pre_tax > 0 else 0.0
    satisfied = int(
        retention >= persona.min_marginal_retention and effective <= persona.max_effective_rate
    )

    return SatisfactionVerdict(satisfied=satisfied, retention=retention, effective_rate=effective)
