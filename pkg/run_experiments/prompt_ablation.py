import argparse
from typing import Optional, Sequence

from engine.config import load_config, with_overrides
from engine.simulation import run_simulation
from run_experiments.common import final_year_swf, reference_optimum, save_results, share_of_optimum
from utils import setup_logging


PROMPT_VARIANTS = {
    "explore_and_exploit": ["include_explore_cue=true", "include_exploit_cue=true"],
    "no_explore": ["include_explore_cue=false", "include_exploit_cue=true"],
    "no_exploit": ["include_explore_cue=true", "include_exploit_cue=false"],
}


def run_prompt_ablation(config_path: Optional[str] = "runs/mock.json", overrides: Sequence[str] = ()) -> dict:
    """
    Planner prompt with both phase cues, without the exploration cue and
    without the exploitation cue
    """
    base = load_config(config_path, overrides)
    reference = reference_optimum(base)

    results = {}
    for variant, switches in PROMPT_VARIANTS.items():
        print(f"Prompt variant: {variant}")
        _, summary = run_simulation(with_overrides(base, switches))
        swf = final_year_swf(summary)
        results[variant] = {"final_year_swf": swf, "share_of_optimum": share_of_optimum(swf, reference)}
        print(f"  {results[variant]['share_of_optimum']:.1f}% of SWF*")

    save_results("prompt_ablation", {"swf_star": reference["swf_star"], "variants": results})

    return results


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = argparse.ArgumentParser(description="Planner prompt ablation")
    parser.add_argument("--config", default="runs/mock.json")
    parser.add_argument("--override", action="append", default=[])
    args = parser.parse_args(argv)
    setup_logging("WARNING")
    run_prompt_ablation(args.config, args.override)


if __name__ == "__main__":
    main()
