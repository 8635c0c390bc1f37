from typing import Sequence, Union

import numpy as np

from utils import INCOME_FLOOR


def social_welfare(
    incomes: Union[Sequence[float], np.ndarray],
    utilities: Union[Sequence[float], np.ndarray],
    income_floor: float = INCOME_FLOOR,
) -> float:
    """
    Sum of utilities weighted by inverse pre-tax income
    """
    z = np.asarray(incomes, dtype=float)
    u = np.asarray(utilities, dtype=float)
    if z.shape != u.shape or z.size == 0:
        raise ValueError("incomes and utilities must be equal-length and nonempty")

    return float(np.sum(u / np.maximum(z, income_floor)))
