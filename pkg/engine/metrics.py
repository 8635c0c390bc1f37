import logging
from dataclasses import dataclass, fields
from itertools import groupby
from typing import Optional

import numpy as np
import pandas as pd

from agents.observations import bracket_histograms
from engine.event_log import EventLog
from fiscal_core.tax_schedule import TaxSchedule


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-3
DEFAULT_WINDOW = 16


@dataclass(frozen=True)
class MetricsSummary:
    """
    Everything derived from the STEP records of a log; year_rates are the
    rates in force at each year's first step
    """

    n_workers: int = 0
    n_steps: int = 0
    swf: tuple = ()
    swf_moving_average: tuple = ()
    year_mean_swf: tuple = ()
    year_rates: tuple = ()
    convergence_steps: tuple = ()
    final_swf: Optional[float] = None
    final_income_histogram: tuple = ()
    final_utility_histogram: tuple = ()
    max_budget_gap: float = 0.0

    @property
    def n_years(self) -> int:
        return len(self.year_mean_swf)

    def to_dict(self) -> dict:
        return {
            "n_workers": self.n_workers,
            "n_steps": self.n_steps,
            "n_years": self.n_years,
            "final_swf": self.final_swf,
            "year_mean_swf": list(self.year_mean_swf),
            "year_rates": [list(rates) for rates in self.year_rates],
            "convergence_steps": list(self.convergence_steps),
            "final_income_histogram": list(self.final_income_histogram),
            "final_utility_histogram": list(self.final_utility_histogram),
            "max_budget_gap": self.max_budget_gap,
            "swf": list(self.swf),
            "swf_moving_average": list(self.swf_moving_average),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsSummary":
        known = {f.name for f in fields(cls)}
        values = {}
        for key, value in data.items():
            if key not in known:
                continue
            if key == "year_rates":
                value = tuple(tuple(rates) for rates in value)
            elif isinstance(value, list):
                value = tuple(value)
            values[key] = value

        return cls(**values)


def _header_config(log: EventLog) -> dict:
    return (log.header or {}).get("config", {})


def _year_steps(log: EventLog, year: int) -> list[dict]:
    return [record for record in log.steps if record["tax_year"] == year]


def _settled_step(steps: list[dict], tolerance: float) -> Optional[int]:
    """
    First step after which |mean du/dt| stays below tolerance for the rest
    of the steps; None when fewer than two steps or the last change is still
    above tolerance
    """
    if len(steps) < 2:
        return None
    utilities = np.array([record["utilities"] for record in steps], dtype=float)
    changes = np.abs(np.diff(utilities, axis=0).mean(axis=1))
    violating = np.flatnonzero(changes >= tolerance)
    if violating.size == 0:
        return steps[0]["t"]
    last = int(violating[-1])
    if last == changes.size - 1:
        return None

    return steps[last + 1]["t"]


def convergence_step(log: EventLog, year: int, tolerance: Optional[float] = None) -> Optional[int]:
    if tolerance is None:
        tolerance = _header_config(log).get("convergence_tolerance", DEFAULT_TOLERANCE)

    return _settled_step(_year_steps(log, year), tolerance)


def swf_moving_average(log: EventLog, window: Optional[int] = None) -> pd.Series:
    """
    Trailing mean of the step SWF, indexed by step
    """
    if window is None:
        window = _header_config(log).get("swf_window", DEFAULT_WINDOW)
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    steps = log.steps
    series = pd.Series(
        [record["swf"] for record in steps],
        index=pd.Index([record["t"] for record in steps], name="t"),
        name="swf",
        dtype=float,
    )

    return series.rolling(window, min_periods=1).mean()


def budget_gap(record: dict) -> float:
    pre = float(np.sum(record["pre_tax"]))
    gap = abs(float(np.sum(record["post_tax"])) - pre)

    return gap / pre if pre > 0 else gap


def summarize(log: EventLog, window: Optional[int] = None, tolerance: Optional[float] = None) -> MetricsSummary:
    """
    Summary of a run from its STEP records alone
    """
    steps = log.steps
    if not steps:
        return MetricsSummary()
    config = _header_config(log)
    tolerance = config.get("convergence_tolerance", DEFAULT_TOLERANCE) if tolerance is None else tolerance

    year_means, year_rates, settled = [], [], []
    for _, group in groupby(steps, key=lambda record: record["tax_year"]):
        year = list(group)
        year_means.append(float(np.mean([record["swf"] for record in year])))
        year_rates.append(tuple(year[0]["rates"]))
        settled.append(_settled_step(year, tolerance))

    last = steps[-1]
    thresholds = (log.header or {}).get("thresholds") or []
    counts, means = (), ()
    if thresholds:
        schedule = TaxSchedule(thresholds=tuple(thresholds), rates=tuple(last["rates"]))
        counts, means = bracket_histograms(schedule, last["pre_tax"], last["utilities"])

    return MetricsSummary(
        n_workers=len(last["labor"]),
        n_steps=len(steps),
        swf=tuple(record["swf"] for record in steps),
        swf_moving_average=tuple(swf_moving_average(log, window).tolist()),
        year_mean_swf=tuple(year_means),
        year_rates=tuple(year_rates),
        convergence_steps=tuple(settled),
        final_swf=year_means[-1],
        final_income_histogram=counts,
        final_utility_histogram=means,
        max_budget_gap=max(budget_gap(record) for record in steps),
    )


def replay(log: EventLog) -> MetricsSummary:
    """
    Recomputes the summary of a logged run
    """
    summary = summarize(log)
    logger.info("replayed %d steps over %d tax years", summary.n_steps, summary.n_years)

    return summary
