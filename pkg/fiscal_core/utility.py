from dataclasses import dataclass
from typing import Union

import numpy as np

from utils import CONSUMPTION_FLOOR


Numeric = Union[float, np.ndarray]


@dataclass(frozen=True)
class UtilityParams:
    """
    Isoelastic consumption utility, power labor disutility and the
    dissatisfaction penalty of the bounded scenario
    """

    eta: float = 0.5
    psi: float = 0.01
    delta: float = 2.0
    phi: float = 0.0

    def __post_init__(self) -> None:
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.eta == 1:
            raise ValueError("eta = 1 (log utility) is not supported")
        if self.psi < 0:
            raise ValueError(f"psi must be nonnegative, got {self.psi}")
        if self.delta <= 1:
            raise ValueError(f"delta must exceed 1, got {self.delta}")
        if self.phi < 0:
            raise ValueError(f"phi must be nonnegative, got {self.phi}")

    @property
    def labor_elasticity(self) -> float:
        """
        Elasticity of labor to the net-of-tax rate without income effects
        """
        return (1 - self.eta) / (self.delta - 1 + self.eta)


def consumption_utility(post_tax: Numeric, params: UtilityParams) -> Numeric:
    consumption = np.maximum(post_tax, CONSUMPTION_FLOOR)

    return (consumption ** (1 - params.eta) - 1) / (1 - params.eta)


def marginal_consumption_utility(post_tax: Numeric, params: UtilityParams) -> Numeric:
    return np.maximum(post_tax, CONSUMPTION_FLOOR) ** (-params.eta)


def isoelastic_utility(post_tax: Numeric, labor: Numeric, params: UtilityParams) -> Numeric:
    """
    (z^(1-eta) - 1) / (1 - eta) - psi * l^delta with z floored at 1e-6
    """
    if np.any(np.asarray(labor) < 0):
        raise ValueError("labor must be nonnegative")

    return consumption_utility(post_tax, params) - params.psi * np.asarray(labor) ** params.delta


def bounded_utility(
    post_tax: Numeric,
    labor: Numeric,
    satisfied: Numeric,
    params: UtilityParams,
    phi: Numeric = None,
) -> Numeric:
    """
    Isoelastic utility minus the penalty phi when the satisfaction flag is 0;
    phi defaults to params.phi and may be given per worker
    """
    flags = np.asarray(satisfied)
    if not np.all((flags == 0) | (flags == 1)):
        raise ValueError("satisfaction flag must be 0 or 1")
    penalty = params.phi if phi is None else phi

    return isoelastic_utility(post_tax, labor, params) - (1 - flags) * np.asarray(penalty)
