from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_swf_series(exports_dir: Union[str, Path], window: int = 16) -> Path:
    """
    Per-step SWF with its moving average
    """
    exports_dir = Path(exports_dir)
    swf = pd.read_csv(exports_dir / "swf.csv")

    plt.figure(figsize=(12, 6))
    plt.plot(swf["step"], swf["swf"], label="SWF", color="grey", alpha=0.5)
    plt.plot(swf["step"], swf["swf"].rolling(window, min_periods=1).mean(), label=f"{window}-step average", color="black")
    plt.xlabel("Step")
    plt.ylabel("Social welfare")
    plt.legend()
    plt.tight_layout()

    return _save(exports_dir / "swf.png")


def plot_bracket_shares(exports_dir: Union[str, Path]) -> Path:
    """
    Share of the population in each bracket over time
    """
    exports_dir = Path(exports_dir)
    shares = pd.read_csv(exports_dir / "bracket_shares.csv")
    brackets = [column for column in shares.columns if column.startswith("bracket_")]

    plt.figure(figsize=(12, 6))
    plt.stackplot(shares["step"], *[shares[column] for column in brackets], labels=brackets)
    plt.xlabel("Step")
    plt.ylabel("Population share")
    plt.ylim(0, 1)
    plt.legend(loc="upper right")
    plt.tight_layout()

    return _save(exports_dir / "bracket_shares.png")


def plot_rates(exports_dir: Union[str, Path]) -> Path:
    exports_dir = Path(exports_dir)
    rates = pd.read_csv(exports_dir / "rates.csv")
    columns = [column for column in rates.columns if column.startswith("rate_")]

    plt.figure(figsize=(12, 6))
    for column in columns:
        plt.step(rates["step"], 100 * rates[column], where="post", label=column)
    plt.xlabel("Step")
    plt.ylabel("Marginal rate (%)")
    plt.legend()
    plt.tight_layout()

    return _save(exports_dir / "rates.png")


def _save(path: Path) -> Path:
    plt.savefig(path, dpi=120)
    plt.close()
    print(f"Saved {path}")

    return path


def plot_run(run_dir: Union[str, Path]) -> list[Path]:
    exports_dir = Path(run_dir) / "exports"
    if not exports_dir.is_dir():
        raise FileNotFoundError(f"{exports_dir}: no exports for this run")

    return [plot_swf_series(exports_dir), plot_bracket_shares(exports_dir), plot_rates(exports_dir)]


def final_utility_spread(exports_dir: Union[str, Path]) -> pd.DataFrame:
    """
    Quartiles of final-step utility by pre-tax income quartile
    """
    utilities = pd.read_csv(Path(exports_dir) / "utilities.csv")
    final = utilities[utilities["step"] == utilities["step"].max()].copy()
    final["income_quartile"] = pd.qcut(final["pre_tax"].rank(method="first"), 4, labels=[1, 2, 3, 4])

    return final.groupby("income_quartile", observed=True)["utility"].describe()[["mean", "25%", "50%", "75%"]]
