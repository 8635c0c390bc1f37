from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from agents.observations import EXPLORE, WorkerObservation
from agents.replay_buffer import ReplayBuffer
from fiscal_core.tax_schedule import TaxSchedule, marginal_rate_vector
from population.personas import Persona


@dataclass(frozen=True)
class WorkerState:
    skill: float
    persona: Persona
    labor: float
    pre_tax: float
    post_tax: float
    utility: float
    satisfied: Optional[int] = None
    history: tuple = field(default=())
    # dissatisfaction penalty, recalibrated each tax year
    phi: float = 0.0
    sequence: int = 0

    def observation(self, schedule: TaxSchedule, rebate: float, window: int) -> WorkerObservation:
        return WorkerObservation(
            pre_tax=self.pre_tax,
            post_tax=self.post_tax,
            marginal_rate_at_income=float(marginal_rate_vector(schedule, self.pre_tax)),
            rebate=rebate,
            labor=self.labor,
            history=self.history,
            window=window,
        )


@dataclass(frozen=True)
class SimState:
    """
    Everything the next step depends on. `period_*` cover the steps since
    the last planner boundary
    """

    t: int
    steps_per_year: int
    schedule: TaxSchedule
    workers: tuple
    rebate: float = 0.0
    buffer: ReplayBuffer = field(default_factory=ReplayBuffer)
    phase: str = EXPLORE
    period_schedule: Optional[TaxSchedule] = None
    period_swf: tuple = field(default=())
    # (min, max) of the period averages seen so far
    swf_range: Optional[tuple] = None
    planner_sequence: int = 0
    candidate_sequence: int = 0
    last_swf: Optional[float] = None

    def __post_init__(self) -> None:
        if self.period_schedule is None:
            object.__setattr__(self, "period_schedule", self.schedule)

    @property
    def tax_year(self) -> int:
        return self.t // self.steps_per_year

    @property
    def n_workers(self) -> int:
        return len(self.workers)

    @property
    def skills(self) -> np.ndarray:
        return np.array([worker.skill for worker in self.workers])

    @property
    def labor(self) -> np.ndarray:
        return np.array([worker.labor for worker in self.workers])

    @property
    def pre_tax(self) -> np.ndarray:
        return np.array([worker.pre_tax for worker in self.workers])

    @property
    def post_tax(self) -> np.ndarray:
        return np.array([worker.post_tax for worker in self.workers])

    @property
    def utilities(self) -> np.ndarray:
        return np.array([worker.utility for worker in self.workers])

    @property
    def phi(self) -> np.ndarray:
        return np.array([worker.phi for worker in self.workers])
