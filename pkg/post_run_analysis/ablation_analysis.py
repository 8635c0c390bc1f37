from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from utils import read_json


def plot_tax_year_ablation(results_dir: Union[str, Path]) -> Path:
    """
    Share of SWF* against tax-year length
    """
    results_dir = Path(results_dir)
    runs = read_json(results_dir / "tax_year_ablation.json")["runs"]
    labels = [f"{run['steps_per_year']}\n({run['total_steps']})" for run in runs]

    plt.figure(figsize=(8, 5))
    plt.bar(labels, [run["share_of_optimum"] for run in runs], color="steelblue")
    plt.xlabel("Steps per tax year (total steps)")
    plt.ylabel("% of SWF*")
    plt.tight_layout()
    path = results_dir / "tax_year_ablation.png"
    plt.savefig(path, dpi=120)
    plt.close()
    print(f"Saved {path}")

    return path


def plot_prompt_ablation(results_dir: Union[str, Path]) -> Path:
    results_dir = Path(results_dir)
    variants = read_json(results_dir / "prompt_ablation.json")["variants"]

    plt.figure(figsize=(6, 5))
    plt.bar(list(variants), [v["share_of_optimum"] for v in variants.values()], color="darkorange")
    plt.ylabel("% of SWF*")
    plt.tight_layout()
    path = results_dir / "prompt_ablation.png"
    plt.savefig(path, dpi=120)
    plt.close()
    print(f"Saved {path}")

    return path
