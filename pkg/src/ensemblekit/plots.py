"""Self-contained SVG plots of the ensemble comparisons.

SVGs are reproducible byte-for-byte: the date metadata is omitted and the
element-id hash salt is pinned.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .berry_esseen import SpectralCDF  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "ensemblekit"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def plot_cdf_vs_gaussian(cdf: SpectralCDF, path, title="") -> None:
    """Step plot of the spectral CDF against its matched Gaussian."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    import numpy as np

    x = cdf.jump_points
    f = np.cumsum(cdf.masses)
    lo = x[0] - 0.05 * (x[-1] - x[0] + 1)
    hi = x[-1] + 0.05 * (x[-1] - x[0] + 1)
    xs = np.concatenate([[lo], x, [hi]])
    fs = np.concatenate([[0.0], f, [1.0]])
    ax.step(xs, fs, where="post", lw=1.2, label="spectral CDF F")
    grid = np.linspace(lo, hi, 400)
    ax.plot(grid, cdf.gaussian(grid), lw=1.2, ls="--", label="Gaussian G")
    ax.set_xlabel("energy")
    ax.set_ylabel("cumulative weight")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_distance_vs_n(series: dict[str, list[tuple[int, float]]], path,
                       ylabel="mean local trace distance") -> None:
    """Measured distances against lattice size, one line per label."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(series):
        pts = sorted(series[label])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                lw=1.2, label=label)
    ax.set_xlabel("number of sites N")
    ax.set_ylabel(ylabel)
    if series:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_margin_table(rows: list[dict], path, max_rows: int = 24) -> None:
    """Render precondition margins as a table image, one row per grid point."""
    rows = rows[:max_rows]
    if not rows:
        rows = [{"point": "(empty run)"}]
    columns = list(rows[0].keys())
    cell_text = [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    height = 0.6 + 0.3 * len(rows)
    fig, ax = plt.subplots(figsize=(max(7, 1.3 * len(columns)), height))
    ax.axis("off")
    table = ax.table(cellText=cell_text, colLabels=columns, loc="center")
    table.auto_set_font_size(False)
    table.set_fontsize(7)
    table.scale(1.0, 1.2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)
