import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from engine.config import ConfigError, load_config
from engine.event_log import EventLogError, read_event_log
from engine.exports import EXPORT_KINDS, export, export_all
from engine.metrics import MetricsSummary, replay
from engine.simulation import Simulation, evaluate_schedule
from engine.solve import solve_saez
from fiscal_core.tax_schedule import TaxSchedule
from population.gb2 import fit_gb2, gb2_loglik, qq_correlation, qq_points
from population.income_data import IncomeDataError, load_income_csv
from utils import VERSION, read_json, setup_logging, write_json


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _overrides(args: argparse.Namespace) -> list[str]:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")

    return overrides


def cmd_simulate(args: argparse.Namespace) -> int:
    """
    Runs one simulation into an output directory
    """
    config = load_config(args.config, _overrides(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "config": "config.json",
        "events": "events.jsonl",
        "summary": "summary.json",
        "run_stats": "run_stats.json",
        "exports": "exports",
    }
    write_json(out / "config.json", config.to_dict())
    write_json(
        out / "manifest.json",
        {
            "version": VERSION,
            "seed": config.seed,
            "config": config.to_dict(),
            "config_source": str(args.config) if args.config else None,
            "started_at": _now(),
            "outputs": paths,
        },
    )

    simulation = Simulation(config)
    log, summary = simulation.run()
    log.write(out / "events.jsonl")
    write_json(out / "summary.json", summary.to_dict())
    export_all(log, out / "exports")
    write_json(out / "run_stats.json", {**simulation.stats, "finished_at": _now()})
    print(f"final SWF {summary.final_swf:.6g} over {summary.n_years} tax years, N={summary.n_workers}")
    print(f"outputs written to {out}")

    return EXIT_OK


def cmd_fit_gb2(args: argparse.Namespace) -> int:
    incomes = load_income_csv(args.csv)
    params = fit_gb2(incomes)
    probabilities, sample_q, model_q = qq_points(incomes, params)
    out = Path(args.out)
    write_json(
        out / "gb2_params.json",
        {
            **params.to_dict(),
            "n": len(incomes),
            "loglik": gb2_loglik(incomes, params),
            "qq_correlation": qq_correlation(incomes, params),
            "source": str(args.csv),
        },
    )
    pd.DataFrame(
        {"probability": probabilities, "sample_quantile": sample_q, "model_quantile": model_q}
    ).to_csv(out / "qq.csv", index=False)
    print(f"GB2 fit on {len(incomes)} incomes: {params.to_dict()}")

    return EXIT_OK


def cmd_solve_saez(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    report = solve_saez(config)
    write_json(Path(args.out) / "solver_report.json", report.to_dict())
    print(
        f"{report.method}: best rates {list(report.schedule.rates)}, welfare {report.best_swf:.6g}, "
        f"converged {report.converged} after {report.iterations} iterations"
    )

    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    schedule_path = Path(args.schedule)
    if not schedule_path.is_file():
        raise FileNotFoundError(f"{schedule_path}: no such schedule file")
    try:
        schedule = TaxSchedule.from_dict(read_json(schedule_path))
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigError([f"{schedule_path}: {error}"]) from error
    swf = evaluate_schedule(config, schedule)
    write_json(Path(args.out) / "evaluation.json", {"schedule": schedule.to_dict(), "swf": swf})
    print(f"converged SWF {swf:.6g} under rates {list(schedule.rates)}")

    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    if not log_path.is_file():
        raise FileNotFoundError(f"{log_path}: no such event log")
    summary = replay(read_event_log(log_path))
    out = Path(args.out) if args.out else log_path.parent / "replayed_summary.json"
    write_json(out, summary.to_dict())

    recorded = log_path.parent / "summary.json"
    if recorded.is_file():
        matches = MetricsSummary.from_dict(read_json(recorded)) == summary
        print(f"replayed summary matches {recorded}: {matches}")
        if not matches:
            return EXIT_FAILURE
    print(f"replayed {summary.n_steps} steps, final SWF {summary.final_swf}")

    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    if not log_path.is_file():
        raise FileNotFoundError(f"{log_path}: no such event log")
    path = export(read_event_log(log_path), args.kind, Path(args.out) / f"{args.kind}.csv")
    print(f"wrote {path}")

    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Planner/worker taxation simulator")
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    def with_config(sub: argparse.ArgumentParser, required: bool = True) -> None:
        sub.add_argument("--config", required=required, help="JSON configuration file")
        sub.add_argument("--override", action="append", metavar="KEY=VALUE", help="dotted-key override, repeatable")
        sub.add_argument("--seed", type=int, help="shorthand for --override seed=N")

    simulate = commands.add_parser("simulate", help="run a simulation")
    with_config(simulate)
    simulate.add_argument("--out", default="output/simulation", help="output directory")
    simulate.set_defaults(handler=cmd_simulate)

    fit = commands.add_parser("fit-gb2", help="fit a GB2 income prior to a CSV of incomes")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--out", default="output/gb2")
    fit.set_defaults(handler=cmd_fit_gb2)

    solve = commands.add_parser("solve-saez", help="optimal schedule for the stationary economy")
    with_config(solve)
    solve.add_argument("--out", default="output/saez")
    solve.set_defaults(handler=cmd_solve_saez)

    evaluate = commands.add_parser("evaluate", help="one tax year of scripted workers under a schedule")
    evaluate.add_argument("--schedule", required=True, help='JSON {"thresholds": [...], "rates": [...]}')
    with_config(evaluate)
    evaluate.add_argument("--out", default="output/evaluation")
    evaluate.set_defaults(handler=cmd_evaluate)

    replay_cmd = commands.add_parser("replay", help="recompute the summary of a logged run")
    replay_cmd.add_argument("--log", required=True)
    replay_cmd.add_argument("--out")
    replay_cmd.set_defaults(handler=cmd_replay)

    export_cmd = commands.add_parser("export", help="plot CSVs from an event log")
    export_cmd.add_argument("--log", required=True)
    export_cmd.add_argument("--kind", required=True, choices=EXPORT_KINDS)
    export_cmd.add_argument("--out", default="output/exports")
    export_cmd.set_defaults(handler=cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return EXIT_USAGE if exit_.code else EXIT_OK
    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except ConfigError as error:
        print(error, file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IncomeDataError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except EventLogError as error:
        print(f"corrupted event log: {error}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
