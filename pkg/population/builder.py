import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from population.gb2 import Gb2Params, fit_gb2, gb2_sample
from population.income_data import SYNTHETIC_INCOMES_PATH, load_income_csv
from population.personas import PERSONA_LIBRARY_PATH, Persona, assign_personas, load_persona_library
from population.skills import skills_from_incomes
from utils import REFERENCE_HOURS


logger = logging.getLogger(__name__)

SOURCES = ("gb2", "csv", "csv_gb2", "identical")


@dataclass(frozen=True)
class PopulationConfig:
    """
    Where worker incomes come from; skills are income / reference_hours
    """

    source: str = "gb2"
    gb2_a: float = 3.0
    gb2_b: float = 60000.0
    gb2_p: float = 0.8
    gb2_q: float = 1.2
    csv_path: str = str(SYNTHETIC_INCOMES_PATH)
    identical_income: float = 60000.0
    reference_hours: float = REFERENCE_HOURS
    calibration_hours: float = 40.0
    persona_library: str = str(PERSONA_LIBRARY_PATH)

    @property
    def gb2_params(self) -> Gb2Params:
        return Gb2Params(a=self.gb2_a, b=self.gb2_b, p=self.gb2_p, q=self.gb2_q)


def draw_incomes(config: PopulationConfig, n: int, seed: int) -> np.ndarray:
    if config.source == "gb2":
        return gb2_sample(n, config.gb2_params, seed)
    if config.source == "identical":
        return np.full(n, float(config.identical_income))

    observed = np.asarray(load_income_csv(config.csv_path))
    if config.source == "csv":
        rng = np.random.default_rng(seed)
        return rng.choice(observed, size=n, replace=True)
    if config.source == "csv_gb2":
        return gb2_sample(n, fit_gb2(observed), seed)

    raise ValueError(f"unknown population source {config.source!r}, expected one of {SOURCES}")


def build_population(
    config: PopulationConfig, n: int, seed: int, library: Optional[list[Persona]] = None
) -> tuple[np.ndarray, list[Persona]]:
    """
    Skills drawn once per run plus persona assignment
    """
    incomes = draw_incomes(config, n, seed)
    skills = np.array([profile.skill for profile in skills_from_incomes(incomes, config.reference_hours)])
    library = library if library is not None else load_persona_library(config.persona_library)
    personas = assign_personas(n, library, seed + 1)
    logger.info(
        "population of %d from %s: median skill %.1f, median anchor income %.0f",
        n,
        config.source,
        float(np.median(skills)),
        float(np.median(incomes)),
    )

    return skills, personas
