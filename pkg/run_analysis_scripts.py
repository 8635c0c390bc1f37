import argparse
from pathlib import Path
from typing import Optional, Sequence

from post_run_analysis.ablation_analysis import plot_prompt_ablation, plot_tax_year_ablation
from post_run_analysis.gb2_fit_analysis import run_gb2_fit_analysis
from post_run_analysis.run_plots import final_utility_spread, plot_run
from population.income_data import SYNTHETIC_INCOMES_PATH


def main(argv: Optional[Sequence[str]] = None) -> None:
    """
    Select the analysis to run
    """
    parser = argparse.ArgumentParser(description="Plots over finished runs")
    parser.add_argument("--run", help="output directory of `main.py simulate`")
    parser.add_argument("--gb2", help="output directory of `main.py fit-gb2`")
    parser.add_argument("--csv", default=str(SYNTHETIC_INCOMES_PATH), help="incomes the GB2 was fitted on")
    parser.add_argument("--experiments", help="results directory of run_experiments")
    args = parser.parse_args(argv)

    if args.run:
        print("Simulation plots")
        plot_run(args.run)
        print("Final utility by income quartile")
        print(final_utility_spread(Path(args.run) / "exports"))

    if args.gb2:
        print("GB2 fit analysis")
        run_gb2_fit_analysis(args.gb2, args.csv)

    if args.experiments:
        experiments = Path(args.experiments)
        if (experiments / "tax_year_ablation.json").is_file():
            print("Tax-year length ablation")
            plot_tax_year_ablation(experiments)
        if (experiments / "prompt_ablation.json").is_file():
            print("Prompt ablation")
            plot_prompt_ablation(experiments)


if __name__ == "__main__":
    main()
