import logging
import os
from typing import Iterable, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def plot_series(df: pd.DataFrame, x_col: str, y_col: str, title: str, save_path: str,
                xlabel: Optional[str] = None, ylabel: Optional[str] = None) -> str:
    """
    Line plot of one column against another, saved as SVG.

    Args:
        df: DataFrame holding both columns
        x_col: Column for the horizontal axis
        y_col: Column to plot
        title: Plot title
        save_path: Target .svg path; an existing file is never overwritten

    Returns:
        Path to the saved plot file
    """
    if os.path.exists(save_path):
        raise FileExistsError(f"refusing to overwrite existing plot {save_path}")
    data = df[[x_col, y_col]].dropna()

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(data[x_col], data[y_col], linewidth=2)
    ax.set_title(title, fontsize=12, fontweight="bold")
    ax.set_xlabel(xlabel or x_col)
    ax.set_ylabel(ylabel or y_col)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(save_path, format="svg")
    plt.close(fig)
    logger.info("--- Plot saved at %s ---", save_path)
    return save_path


def plot_columns(df: pd.DataFrame, x_col: str, y_cols: Iterable[str], out_dir: str, prefix: str) -> List[str]:
    """One SVG per series: <prefix>_<column>.svg."""
    paths = []
    for col in y_cols:
        if col not in df.columns:
            continue
        paths.append(plot_series(df, x_col, col, f"{prefix}: {col}", os.path.join(out_dir, f"{prefix}_{col}.svg")))
    return paths
