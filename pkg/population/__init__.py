from population.builder import PopulationConfig, build_population, draw_incomes
from population.gb2 import (
    Gb2Params,
    fit_gb2,
    gb2_cdf,
    gb2_loglik,
    gb2_pdf,
    gb2_quantile,
    gb2_sample,
    qq_correlation,
    qq_points,
)
from population.income_data import IncomeDataError, load_income_csv
from population.personas import Persona, assign_personas, load_persona_library
from population.skills import SkillProfile, calibrate_psi, skills_from_incomes
