"""Static PNG plots of experiment sweeps (Agg backend, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def loglog(path, series: dict[str, tuple], xlabel: str, ylabel: str, title: str = "") -> None:
    """series maps a label to (x, y); nonpositive values are dropped."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=110)
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = (x > 0) & (y > 0) & np.isfinite(y)
        ax.loglog(x[ok], y[ok], "o-", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def heatmap(path, values: np.ndarray, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.0), dpi=110)
    im = ax.imshow(values, origin="lower", cmap="viridis")
    fig.colorbar(im, ax=ax)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def bars(path, labels: list[str], values: list[float], ylabel: str, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=110)
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
