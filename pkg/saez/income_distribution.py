from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import gaussian_kde


@dataclass(frozen=True, eq=False)
class EmpiricalIncomeDist:
    """
    Step CDF of the observed incomes and a Gaussian kernel density fitted on
    log-income, mapped back with the 1/z Jacobian
    """

    sorted_incomes: np.ndarray
    bandwidth: float
    kde: gaussian_kde = field(repr=False)

    @classmethod
    def from_incomes(
        cls, incomes: Union[Sequence[float], np.ndarray], bw_method: Union[str, float] = "silverman"
    ) -> "EmpiricalIncomeDist":
        z = np.sort(np.asarray(incomes, dtype=float))
        positive = z[z > 0]
        if positive.size < 2 or np.all(positive == positive[0]):
            raise ValueError("density estimation needs at least two distinct positive incomes")
        kde = gaussian_kde(np.log(positive), bw_method=bw_method)

        return cls(sorted_incomes=z, bandwidth=float(np.sqrt(kde.covariance[0, 0])), kde=kde)

    @property
    def n(self) -> int:
        return self.sorted_incomes.size

    def cdf(self, z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        values = np.searchsorted(self.sorted_incomes, z, side="right") / self.n
        return float(values) if np.ndim(values) == 0 else values

    def density(self, z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        flat = np.atleast_1d(z)
        values = np.zeros_like(flat)
        positive = flat > 0
        # kernel weight of the zero incomes sits outside the log support
        share = np.count_nonzero(self.sorted_incomes > 0) / self.n
        values[positive] = share * self.kde(np.log(flat[positive])) / flat[positive]

        return float(values[0]) if z.ndim == 0 else values

    def count_above(self, z_star: float) -> int:
        return int(self.n - np.searchsorted(self.sorted_incomes, z_star, side="left"))

    def mean_above(self, z_star: float) -> Optional[float]:
        """
        z_M, the mean income at or above z_star (None when nobody is)
        """
        above = self.sorted_incomes[np.searchsorted(self.sorted_incomes, z_star, side="left") :]
        return float(above.mean()) if above.size else None


def pareto_parameter(z: float, dist: EmpiricalIncomeDist) -> float:
    """
    Local Pareto parameter z h(z) / (1 - H(z))
    """
    if z > dist.sorted_incomes[-1]:
        raise ValueError(f"income {z} lies above the support (max {dist.sorted_incomes[-1]})")
    tail = 1 - dist.cdf(z)
    if tail <= 0:
        raise ValueError(f"H({z}) = 1, the local Pareto parameter is undefined")

    return z * dist.density(z) / tail
