from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from fiscal_core.tax_schedule import TaxSchedule
from saez.economy import Economy, Outcome, WelfareWeights, rebate_dollar_value
from saez.income_distribution import EmpiricalIncomeDist, pareto_parameter
from utils import INCOME_FLOOR


Weights = Union[WelfareWeights, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class SaezBracketStats:
    """
    A welfare effect, B mechanical effect, C behavioural base of one bracket
    """

    bracket: int
    A: float
    B: float
    C: float
    G: float
    alpha: float
    e: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "bracket": self.bracket,
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "G": self.G,
            "alpha": self.alpha,
            "e": self.e,
        }


def _weights(weights: Weights, n: int) -> np.ndarray:
    g = weights.g if isinstance(weights, WelfareWeights) else np.asarray(weights, dtype=float)
    if g.shape != (n,):
        raise ValueError(f"{g.size} weights for {n} incomes")

    return g


def bracket_statistics(
    incomes: Union[Sequence[float], np.ndarray],
    weights: Weights,
    schedule: TaxSchedule,
    bracket: int,
    e: Optional[float] = None,
) -> Optional[SaezBracketStats]:
    """
    Discrete sums over workers; None when nobody reaches the bracket
    """
    z = np.asarray(incomes, dtype=float)
    g = _weights(weights, z.size)
    n = z.size
    lower, upper = schedule.bracket_bounds(bracket)
    # z - z_j inside the bracket, the full width above it, 0 below
    exposure = np.clip(z - lower, 0.0, upper - lower)
    inside = (z >= lower) & (z < upper)

    B = float(np.sum(exposure) / n)
    if B <= 0:
        return None
    A = float(np.sum(g * exposure) / np.sum(g))
    C = float(np.sum(np.where(inside, z, 0.0)) / n)

    return SaezBracketStats(bracket=bracket, A=A, B=B, C=C, G=A / B, alpha=C / B, e=e)


def weight_response(outcome: Outcome, economy: Economy, schedule: TaxSchedule, bracket: int) -> float:
    """
    Welfare gained because the bracket's shrinking incomes raise their own
    1/z weights, per unit of the bracket's mechanical revenue in rebate
    dollars; zero when the weights are frozen
    """
    if economy.weighting != "current":
        return 0.0
    z = outcome.pre_tax
    lower, upper = schedule.bracket_bounds(bracket)
    B = float(np.sum(np.clip(z - lower, 0.0, upper - lower)) / z.size)
    value = rebate_dollar_value(outcome, economy)
    if B <= 0 or value <= 0:
        return 0.0
    # floored weights do not move
    responding = (z >= lower) & (z < upper) & (z > INCOME_FLOOR)

    return float(np.sum(outcome.utilities[responding] / z[responding]) / (B * value))


def top_rate_statistics(
    incomes: Union[Sequence[float], np.ndarray], weights: Weights, z_star: float
) -> Optional[SaezBracketStats]:
    """
    Linear tax above z_star, written with M (count above) and z_M (their
    mean income)
    """
    z = np.asarray(incomes, dtype=float)
    g = _weights(weights, z.size)
    above = z >= z_star
    M = int(np.count_nonzero(above))
    if M == 0:
        return None
    z_M = float(z[above].mean())
    if z_M <= z_star:
        return None

    A = float(np.sum(g[above] * (z[above] - z_star)) / np.sum(g))
    B = float(np.sum(z[above] - z_star) / z.size)
    C = float(np.sum(z[above]) / z.size)
    G = float(np.mean(g[above] * (z[above] - z_star)) / (np.mean(g) * (z_M - z_star)))

    return SaezBracketStats(bracket=-1, A=A, B=B, C=C, G=G, alpha=z_M / (z_M - z_star))


def nonlinear_statistics(
    z: float, incomes: Union[Sequence[float], np.ndarray], weights: Weights, dist: EmpiricalIncomeDist
) -> tuple[float, float]:
    """
    G(z) and a(z) of the rate for an infinitesimal bracket at z
    """
    incomes = np.asarray(incomes, dtype=float)
    g = _weights(weights, incomes.size)
    tail = 1 - dist.cdf(z)
    if tail <= 0:
        raise ValueError(f"no mass above {z}")
    G = float(np.sum(g[incomes >= z]) / (np.sum(g) * tail))

    return G, pareto_parameter(z, dist)
