from dataclasses import replace
from pathlib import Path
from typing import Union

import numpy as np

from engine.config import SimConfig
from engine.metrics import MetricsSummary
from engine.simulation import evaluate_schedule
from engine.solve import solve_saez, stationary_economy
from fiscal_core.tax_schedule import TaxSchedule
from population.builder import build_population
from utils import write_json


RESULTS_DIR = Path("output") / "experiments"


def reference_optimum(config: SimConfig) -> dict:
    """
    SWF* for a run: the iterated grid search optimum on the stationary
    economy, scored with one tax year of scripted workers so it is measured
    on the same welfare scale as the simulation
    """
    skills, _ = build_population(config.population, config.n_workers, config.seed)
    economy = stationary_economy(config, skills)
    report = solve_saez(replace(config, saez=replace(config.saez, method="grid")), economy=economy)
    initial = config.initial_tax_schedule()

    return {
        "schedule": report.schedule,
        "swf_star": evaluate_schedule(config, report.schedule, skills),
        "swf_initial": evaluate_schedule(config, initial, skills),
    }


def final_year_swf(summary: MetricsSummary) -> float:
    return float(summary.year_mean_swf[-1])


def share_of_optimum(swf: float, reference: dict) -> float:
    """
    Percent of the welfare gain from the initial schedule to SWF* that a run
    achieved
    """
    gain = reference["swf_star"] - reference["swf_initial"]
    if np.isclose(gain, 0.0):
        return 100.0

    return float(100.0 * (swf - reference["swf_initial"]) / gain)


def save_results(name: str, results: Union[dict, list], directory: Union[str, Path] = RESULTS_DIR) -> Path:
    path = Path(directory) / f"{name}.json"
    write_json(path, results)
    print(f"Results written to {path}")

    return path


def schedule_rates(schedule: TaxSchedule) -> list[float]:
    return [round(rate, 4) for rate in schedule.rates]
