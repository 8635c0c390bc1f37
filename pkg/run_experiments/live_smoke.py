import argparse
from typing import Optional, Sequence

import numpy as np

from engine.config import load_config
from engine.event_log import PARSE_FAILURE, POLICY, EventLog
from engine.simulation import Simulation
from run_experiments.common import save_results
from utils import setup_logging


MAX_FAILURE_RATE = 0.05


def parse_failure_rate(log: EventLog, gateway_calls: int) -> float:
    """
    Unparseable replies over all model calls
    """
    failed = sum(len(entry["replies"]) for record in log.of_kind(PARSE_FAILURE) for entry in record["failures"])

    return failed / gateway_calls if gateway_calls else 0.0


def best_buffer_trace(log: EventLog) -> list[float]:
    """
    Running best of the period-average SWF at each planner boundary
    """
    boundaries = [record["t"] for record in log.of_kind(POLICY)]
    swf = np.array([record["swf"] for record in log.steps])
    steps = np.array([record["t"] for record in log.steps])
    averages = []
    start = 0
    for boundary in boundaries:
        period = swf[(steps >= start) & (steps < boundary)]
        if period.size:
            averages.append(float(period.mean()))
        start = boundary

    return np.maximum.accumulate(averages).tolist() if averages else []


def run_live_smoke(config_path: str = "runs/live_http.json", overrides: Sequence[str] = ()) -> dict:
    """
    Short run against a real model server; records what it observes and
    never fails on the numbers themselves
    """
    config = load_config(config_path, overrides)
    print(f"Live run: {config.n_workers} workers, {config.n_years} tax years against {config.gateway.base_url}")
    simulation = Simulation(config)
    log, summary = simulation.run()

    rate = parse_failure_rate(log, simulation.stats["gateway_calls"])
    trace = best_buffer_trace(log)
    results = {
        "parse_failure_rate": rate,
        "parse_failure_rate_ok": rate < MAX_FAILURE_RATE,
        "best_buffer_swf": trace,
        "best_buffer_nondecreasing": bool(np.all(np.diff(trace) >= 0)) if trace else True,
        "year_mean_swf": summary.year_mean_swf,
        "run_stats": simulation.stats,
    }
    print(f"Parse failure rate {rate:.2%}, best-buffer SWF {trace}")
    save_results("live_smoke", results)

    return results


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="Live model server smoke run")
    parser.add_argument("--config", default="runs/live_http.json")
    parser.add_argument("--override", action="append", default=[])
    args = parser.parse_args(argv)
    setup_logging("INFO")
    run_live_smoke(args.config, args.override)


if __name__ == "__main__":
    main()
