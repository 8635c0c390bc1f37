from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from scipy import stats

from population.gb2 import Gb2Params, gb2_pdf
from population.income_data import load_income_csv
from utils import read_json


def plot_income_fit(incomes: np.ndarray, params: Gb2Params, path: Union[str, Path]) -> Path:
    """
    Income histogram against the fitted GB2 density and a kernel estimate
    """
    incomes = np.asarray(incomes, dtype=float)
    grid = np.linspace(np.quantile(incomes, 0.001), np.quantile(incomes, 0.99), 400)

    plt.figure(figsize=(10, 6))
    plt.hist(incomes, bins=80, range=(grid[0], grid[-1]), density=True, alpha=0.4, color="grey", label="Incomes")
    plt.plot(grid, gb2_pdf(grid, params), color="red", label="GB2 fit")
    plt.plot(grid, stats.gaussian_kde(incomes)(grid), color="black", linestyle="--", label="Kernel density")
    plt.xlabel("Annual income")
    plt.ylabel("Density")
    plt.legend()
    plt.tight_layout()
    plt.savefig(path, dpi=120)
    plt.close()
    print(f"Saved {path}")

    return Path(path)


def plot_qq(qq: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Sample quantiles against GB2 quantiles
    """
    plt.figure(figsize=(6, 6))
    plt.scatter(qq["model_quantile"], qq["sample_quantile"], s=6, color="black")
    limit = float(max(qq["model_quantile"].max(), qq["sample_quantile"].max()))
    plt.plot([0, limit], [0, limit], color="red")
    plt.xlabel("GB2 quantile")
    plt.ylabel("Sample quantile")
    plt.tight_layout()
    plt.savefig(path, dpi=120)
    plt.close()
    print(f"Saved {path}")

    return Path(path)


def run_gb2_fit_analysis(fit_dir: Union[str, Path], csv_path: Union[str, Path]) -> list[Path]:
    """
    Plots the outputs of `main.py fit-gb2`
    """
    fit_dir = Path(fit_dir)
    fitted = read_json(fit_dir / "gb2_params.json")
    params = Gb2Params(a=fitted["a"], b=fitted["b"], p=fitted["p"], q=fitted["q"])
    print(f"GB2 a={params.a:.3f} b={params.b:.0f} p={params.p:.3f} q={params.q:.3f}, Q-Q r={fitted['qq_correlation']:.4f}")

    return [
        plot_income_fit(load_income_csv(csv_path), params, fit_dir / "gb2_fit.png"),
        plot_qq(pd.read_csv(fit_dir / "qq.csv"), fit_dir / "qq.png"),
    ]
