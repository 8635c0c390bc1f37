from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fiscal_core.utility import UtilityParams
from utils import REFERENCE_HOURS


@dataclass(frozen=True)
class SkillProfile:
    skill: float
    reference_hours: float = REFERENCE_HOURS

    def __post_init__(self) -> None:
        if not self.skill > 0:
            raise ValueError(f"skill must be positive, got {self.skill}")

    @property
    def anchor_income(self) -> float:
        return self.skill * self.reference_hours


def skills_from_incomes(
    incomes: Sequence[float], reference_hours: float = REFERENCE_HOURS
) -> list[SkillProfile]:
    """
    Skill per weekly hour, so that skill * reference_hours reproduces the income
    """
    if not reference_hours > 0:
        raise ValueError(f"reference_hours must be positive, got {reference_hours}")
    incomes = np.asarray(incomes, dtype=float)
    if np.any(~(incomes > 0)):
        raise ValueError("incomes must be positive to derive skills")

    return [SkillProfile(skill=float(z / reference_hours), reference_hours=reference_hours) for z in incomes]


def calibrate_psi(skill: float, target_hours: float, params: UtilityParams) -> float:
    """
    psi making target_hours the zero-tax, zero-rebate best response for skill
    """
    if not (skill > 0 and target_hours > 0):
        raise ValueError("skill and target_hours must be positive")

    return skill ** (1 - params.eta) / (params.delta * target_hours ** (params.delta - 1 + params.eta))
