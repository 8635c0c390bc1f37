from pathlib import Path
from typing import Union

import pandas as pd


SYNTHETIC_INCOMES_PATH = Path(__file__).parent / "data" / "acs_like_incomes.csv"


class IncomeDataError(ValueError):
    pass


def load_income_csv(path: Union[str, Path] = SYNTHETIC_INCOMES_PATH) -> list[float]:
    """
    Reads the `income` column; malformed rows are reported by file line number
    """
    data = pd.read_csv(path, dtype=str, skip_blank_lines=True)
    if "income" not in data.columns:
        raise IncomeDataError(f"{path}: missing `income` column (found {list(data.columns)})")

    incomes = pd.to_numeric(data["income"].str.strip(), errors="coerce")
    # header is line 1
    bad_lines = [int(index) + 2 for index in incomes.index[incomes.isna()]]
    if bad_lines:
        raise IncomeDataError(f"{path}: malformed income on lines {bad_lines}")

    return incomes.astype(float).tolist()
