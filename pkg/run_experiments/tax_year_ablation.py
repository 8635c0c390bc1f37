import argparse
from typing import Optional, Sequence

from engine.config import load_config, with_overrides
from engine.simulation import run_simulation
from run_experiments.common import (
    final_year_swf,
    reference_optimum,
    save_results,
    schedule_rates,
    share_of_optimum,
)
from utils import setup_logging


# (steps per tax year, total steps)
TAX_YEAR_LENGTHS = [(8, 310), (16, 600), (64, 2000), (128, 6000), (256, 6000)]


def run_tax_year_ablation(
    config_path: Optional[str] = "runs/mock.json",
    lengths: Sequence[tuple[int, int]] = TAX_YEAR_LENGTHS,
    overrides: Sequence[str] = (),
) -> list[dict]:
    """
    Runs the mock planner at each tax-year length and reports the final
    year's SWF as a share of SWF*
    """
    base = load_config(config_path, overrides)
    reference = reference_optimum(base)
    print(f"SWF* {reference['swf_star']:.6g} at rates {schedule_rates(reference['schedule'])}")

    results = []
    for steps_per_year, total_steps in lengths:
        print(f"Tax year of {steps_per_year} steps, {total_steps} total steps")
        config = with_overrides(
            base,
            [f"steps_per_year={steps_per_year}", f"total_steps={total_steps}", "planner_update_period=null"],
        )
        _, summary = run_simulation(config)
        swf = final_year_swf(summary)
        results.append(
            {
                "steps_per_year": steps_per_year,
                "total_steps": total_steps,
                "n_years": summary.n_years,
                "final_year_swf": swf,
                "share_of_optimum": share_of_optimum(swf, reference),
                "final_rates": summary.year_rates[-1],
            }
        )
        print(f"  {results[-1]['share_of_optimum']:.1f}% of SWF*")

    save_results(
        "tax_year_ablation",
        {"reference": {**reference, "schedule": reference["schedule"].to_dict()}, "runs": results},
    )

    return results


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="Tax-year length ablation")
    parser.add_argument("--config", default="runs/mock.json")
    parser.add_argument("--override", action="append", default=[])
    args = parser.parse_args(argv)
    setup_logging("WARNING")
    run_tax_year_ablation(args.config, overrides=args.override)


if __name__ == "__main__":
    main()
