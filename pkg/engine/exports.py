import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from engine.event_log import EventLog


logger = logging.getLogger(__name__)

EXPORT_KINDS = ("swf", "bracket_shares", "rates", "utilities")


def swf_frame(log: EventLog) -> pd.DataFrame:
    steps = log.steps
    return pd.DataFrame({"step": [r["t"] for r in steps], "swf": [r["swf"] for r in steps]})


def bracket_shares_frame(log: EventLog) -> pd.DataFrame:
    """
    Share of workers whose income falls in each bracket, per step
    """
    steps = log.steps
    thresholds = np.asarray((log.header or {}).get("thresholds", [0.0]), dtype=float)
    if not steps:
        return pd.DataFrame(columns=["step", "tax_year"] + [f"bracket_{j}" for j in range(thresholds.size)])
    incomes = np.array([r["pre_tax"] for r in steps], dtype=float)
    index = np.searchsorted(thresholds, incomes, side="right") - 1
    shares = np.stack([(index == j).mean(axis=1) for j in range(thresholds.size)], axis=1)
    frame = pd.DataFrame(shares, columns=[f"bracket_{j}" for j in range(thresholds.size)])
    frame.insert(0, "tax_year", [r["tax_year"] for r in steps])
    frame.insert(0, "step", [r["t"] for r in steps])

    return frame


def rates_frame(log: EventLog) -> pd.DataFrame:
    """
    The schedule at the first step and at every step where it changed
    """
    steps = log.steps
    rows = []
    previous = None
    for record in steps:
        if record["rates"] != previous:
            rows.append([record["t"], record["tax_year"]] + list(record["rates"]))
            previous = record["rates"]
    n_brackets = len(steps[0]["rates"]) if steps else 0

    return pd.DataFrame(rows, columns=["step", "tax_year"] + [f"rate_{j}" for j in range(n_brackets)])


def utilities_frame(log: EventLog) -> pd.DataFrame:
    """
    Long format, one row per (step, worker)
    """
    steps = log.steps
    if not steps:
        return pd.DataFrame(columns=["step", "worker", "labor", "pre_tax", "post_tax", "utility"])
    n_workers = len(steps[0]["labor"])

    return pd.DataFrame(
        {
            "step": np.repeat([r["t"] for r in steps], n_workers),
            "worker": np.tile(np.arange(n_workers), len(steps)),
            "labor": np.concatenate([r["labor"] for r in steps]),
            "pre_tax": np.concatenate([r["pre_tax"] for r in steps]),
            "post_tax": np.concatenate([r["post_tax"] for r in steps]),
            "utility": np.concatenate([r["utilities"] for r in steps]),
        }
    )


FRAMES = {
    "swf": swf_frame,
    "bracket_shares": bracket_shares_frame,
    "rates": rates_frame,
    "utilities": utilities_frame,
}


def export(log: EventLog, kind: str, path: Union[str, Path]) -> Path:
    if kind not in FRAMES:
        raise ValueError(f"unknown export kind {kind!r}, expected one of {EXPORT_KINDS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FRAMES[kind](log).to_csv(path, index=False)
    logger.debug("wrote %s export to %s", kind, path)

    return path


def export_all(log: EventLog, directory: Union[str, Path]) -> dict[str, Path]:
    directory = Path(directory)
    return {kind: export(log, kind, directory / f"{kind}.csv") for kind in EXPORT_KINDS}
