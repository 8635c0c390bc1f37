from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from agents.replay_buffer import BufferEntry, ReplayBuffer
from fiscal_core.tax_schedule import TaxSchedule
from utils import DEFAULT_LABOR


EXPLORE = "EXPLORE"
EXPLOIT = "EXPLOIT"
PHASES = (EXPLORE, EXPLOIT)


@dataclass(frozen=True)
class HistoryEntry:
    labor: float
    utility: float
    satisfied: Optional[int] = None


@dataclass(frozen=True)
class WorkerObservation:
    pre_tax: float
    post_tax: float
    marginal_rate_at_income: float
    rebate: float
    labor: float = DEFAULT_LABOR
    history: tuple = field(default=())
    window: int = 10

    def __post_init__(self) -> None:
        if len(self.history) > self.window:
            raise ValueError(f"history of {len(self.history)} exceeds window {self.window}")


def push_history(history: tuple, entry: HistoryEntry, window: int) -> tuple:
    """
    Rolling window, oldest first
    """
    return (history + (entry,))[-window:] if window > 0 else ()


@dataclass(frozen=True)
class PlannerObservation:
    income_histogram: tuple
    utility_histogram: tuple
    swf_moving_average: float
    best_trajectories: tuple = field(default=())

    def __post_init__(self) -> None:
        if len(self.income_histogram) != len(self.utility_histogram):
            raise ValueError("income and utility histograms need one bucket per bracket")


def bracket_histograms(
    schedule: TaxSchedule, pre_tax: Sequence[float], utilities: Sequence[float]
) -> tuple[tuple, tuple]:
    """
    Worker counts and mean utility per tax bracket (0 for empty brackets)
    """
    index = np.atleast_1d(schedule.bracket_index(np.asarray(pre_tax, dtype=float)))
    utilities = np.asarray(utilities, dtype=float)
    counts = np.bincount(index, minlength=schedule.n_brackets)
    sums = np.bincount(index, weights=utilities, minlength=schedule.n_brackets)
    means = np.divide(sums, counts, out=np.zeros(schedule.n_brackets), where=counts > 0)

    return tuple(int(c) for c in counts), tuple(float(m) for m in means)


def planner_observation(
    schedule: TaxSchedule,
    pre_tax: Sequence[float],
    utilities: Sequence[float],
    swf_moving_average: float,
    buffer: ReplayBuffer,
) -> PlannerObservation:
    counts, means = bracket_histograms(schedule, pre_tax, utilities)

    return PlannerObservation(
        income_histogram=counts,
        utility_histogram=means,
        swf_moving_average=float(swf_moving_average),
        best_trajectories=tuple(buffer.entries),
    )


def best_entry(obs: PlannerObservation) -> Optional[BufferEntry]:
    return obs.best_trajectories[0] if obs.best_trajectories else None
