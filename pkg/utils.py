import json
import logging
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np


VERSION = "0.4.0"

# 2024 U.S. federal brackets, single filer
US_2024_THRESHOLDS = [0.0, 11600.0, 47150.0, 100525.0, 191950.0, 243725.0, 609350.0]
US_2024_RATES = [0.10, 0.12, 0.22, 0.24, 0.32, 0.35, 0.37]

# 0-90k, 90k-160k, 160k and above
THREE_BRACKET_THRESHOLDS = [0.0, 90000.0, 160000.0]
THREE_BRACKET_RATES = [0.20, 0.30, 0.40]

LABOR_BOUNDS = (0.0, 100.0)
DEFAULT_LABOR = 40.0
REFERENCE_HOURS = 40.0
INCOME_FLOOR = 1e-6
CONSUMPTION_FLOOR = 1e-6
DELTA_CLIP = 20.0
RATE_MIN = 0.0
RATE_MAX = 0.99

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "INFO") -> None:
    """
    Configures the root logger once for command-line use
    """
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def to_jsonable(obj: Any) -> Any:
    """
    Converts dataclasses, numpy scalars and arrays into plain JSON types
    """
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(key): to_jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(val) for val in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)

    return obj


def write_json(path: Union[str, Path], data: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as file:
        json.dump(to_jsonable(data), file, indent=2, sort_keys=True)


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r") as file:
        return json.load(file)
