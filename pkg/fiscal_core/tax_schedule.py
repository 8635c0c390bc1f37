from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from utils import (
    DELTA_CLIP,
    RATE_MAX,
    RATE_MIN,
    THREE_BRACKET_RATES,
    THREE_BRACKET_THRESHOLDS,
    US_2024_RATES,
    US_2024_THRESHOLDS,
)


ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class TaxSchedule:
    """
    Piecewise-linear marginal schedule; the last bracket is unbounded above
    """

    thresholds: tuple = field(default=(0.0,))
    rates: tuple = field(default=(0.0,))
    rate_min: float = RATE_MIN
    rate_max: float = RATE_MAX

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", tuple(float(z) for z in self.thresholds))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

        if not self.thresholds or self.thresholds[0] != 0.0:
            raise ValueError(f"first threshold must be 0, got {self.thresholds[:1]}")
        if any(lo >= hi for lo, hi in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {self.thresholds}")
        if len(self.rates) != len(self.thresholds):
            raise ValueError(
                f"{len(self.rates)} rates given for {len(self.thresholds)} brackets"
            )
        if not self.rate_min <= self.rate_max:
            raise ValueError(f"rate_min {self.rate_min} exceeds rate_max {self.rate_max}")
        for rate in self.rates:
            if not self.rate_min <= rate <= self.rate_max:
                raise ValueError(
                    f"rate {rate} outside [{self.rate_min}, {self.rate_max}]"
                )

    @property
    def n_brackets(self) -> int:
        return len(self.thresholds)

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.append(np.asarray(self.thresholds[1:]), np.inf)

    def bracket_bounds(self, bracket: int) -> tuple[float, float]:
        return self.thresholds[bracket], float(self.upper_bounds[bracket])

    def bracket_index(self, z: ArrayLike) -> Union[int, np.ndarray]:
        """
        Bracket containing z, right-continuous at thresholds
        """
        index = np.searchsorted(np.asarray(self.thresholds), z, side="right") - 1
        return int(index) if np.ndim(index) == 0 else index

    def with_rates(self, rates: Sequence[float]) -> "TaxSchedule":
        return replace(self, rates=tuple(rates))

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "rates": list(self.rates)}

    @classmethod
    def from_dict(cls, data: dict, **bounds) -> "TaxSchedule":
        return cls(thresholds=tuple(data["thresholds"]), rates=tuple(data["rates"]), **bounds)


def flat_schedule(rate: float, **bounds) -> TaxSchedule:
    return TaxSchedule(thresholds=(0.0,), rates=(rate,), **bounds)


def us_2024_schedule() -> TaxSchedule:
    return TaxSchedule(thresholds=tuple(US_2024_THRESHOLDS), rates=tuple(US_2024_RATES))


def three_bracket_schedule(rates: Sequence[float] = THREE_BRACKET_RATES) -> TaxSchedule:
    return TaxSchedule(thresholds=tuple(THREE_BRACKET_THRESHOLDS), rates=tuple(rates))


def _check_nonnegative(z: np.ndarray) -> None:
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise ValueError("income must be nonnegative")


def tax_due_vector(schedule: TaxSchedule, incomes: ArrayLike) -> np.ndarray:
    """
    Integral of marginal rates up to each income
    """
    z = np.asarray(incomes, dtype=float)
    _check_nonnegative(z)
    lower = np.asarray(schedule.thresholds)
    widths = schedule.upper_bounds - lower
    in_bracket = np.clip(z[..., None] - lower, 0.0, widths)

    return in_bracket @ np.asarray(schedule.rates)


def tax_due(schedule: TaxSchedule, z: float) -> float:
    return float(tax_due_vector(schedule, z))


def marginal_rate_vector(schedule: TaxSchedule, incomes: ArrayLike) -> np.ndarray:
    z = np.asarray(incomes, dtype=float)
    _check_nonnegative(z)

    return np.asarray(schedule.rates)[schedule.bracket_index(z)]


def marginal_rate(schedule: TaxSchedule, z: float) -> float:
    return float(marginal_rate_vector(schedule, z))


def average_rate(schedule: TaxSchedule, z: float) -> float:
    """
    Effective rate tax_due / z, 0 at zero income
    """
    return tax_due(schedule, z) / z if z > 0 else 0.0


def apply_taxes(
    schedule: TaxSchedule, incomes: ArrayLike
) -> tuple[np.ndarray, float, float]:
    """
    Taxes every income and returns the full lump-sum rebate to everyone
    """
    z = np.asarray(incomes, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ValueError("apply_taxes needs a nonempty population")

    taxes = tax_due_vector(schedule, z)
    total_tax = float(taxes.sum())
    rebate = total_tax / z.size

    return z - taxes + rebate, total_tax, rebate


def apply_delta(schedule: TaxSchedule, delta: Sequence[float]) -> TaxSchedule:
    """
    Shifts each rate by a percentage-point delta clipped to +-20, then clamps
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (schedule.n_brackets,):
        raise ValueError(
            f"delta has {delta.size} entries, schedule has {schedule.n_brackets} brackets"
        )
    if not np.all(np.isfinite(delta)):
        raise ValueError("delta must be finite")

    shifted = np.asarray(schedule.rates) + np.clip(delta, -DELTA_CLIP, DELTA_CLIP) / 100
    clamped = np.clip(shifted, schedule.rate_min, schedule.rate_max)

    return schedule.with_rates(clamped.tolist())
