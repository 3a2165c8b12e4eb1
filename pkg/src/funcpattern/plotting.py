"""SVG figures: kernels with significant zones, F series, heatmaps and sweep trends.

Figures are written with the Agg backend, a fixed SVG hash salt and no date metadata so that reruns produce
identical files.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from funcpattern.fanova import FanovaKernels  # noqa: E402
from funcpattern.funcdata import HeatmapTable  # noqa: E402
from funcpattern.inference import Interval, TestReport  # noqa: E402
from funcpattern.simulate import SweepReport  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "funcpattern"
ZONE_COLOR = "#f4a261"


def _save_fig(fig: plt.Figure, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(target, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Wrote %s", target)
    return target


def _shade(ax: plt.Axes, zones: Sequence[Interval]) -> None:
    for start, stop in zones:
        ax.axvspan(start, stop, color=ZONE_COLOR, alpha=0.25, linewidth=0)


def plot_kernels(kernels: FanovaKernels, variate: int, zones: Sequence[Interval], path: Union[str, Path]) -> Path:
    """Grand mean and group effects of one variate, with the variate's significant zones shaded."""
    t = kernels.grid.points
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    top.plot(t, kernels.grand_mean[variate], color="black")
    top.set_ylabel("grand mean")
    _shade(bottom, zones)
    for g, group in enumerate(kernels.group_labels):
        bottom.plot(t, kernels.effects[variate, g], label=group)
    bottom.axhline(0.0, color="grey", linewidth=0.5)
    bottom.set_xlabel("t")
    bottom.set_ylabel("group effect")
    bottom.legend(loc="best", fontsize="small")
    fig.suptitle(f"Kernels of {kernels.variate_labels[variate]}")
    return _save_fig(fig, path)


def plot_f_series(report: TestReport, path: Union[str, Path]) -> Path:
    """Observed F statistic against its critical value, with rejection zones shaded."""
    series = report.series
    t = series.grid.points
    finite = series.values[np.isfinite(series.values)]
    ceiling = 1.1 * max(float(finite.max()) if finite.size else 1.0, float(np.nanmax(report.critical_values())))
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    _shade(ax, report.zones)
    ax.plot(t, np.minimum(series.values, ceiling), color="#1f77b4", label="F")
    ax.plot(t, report.critical_values(), color="#d62728", linestyle="--", label="critical")
    ax.set_xlabel("t")
    ax.set_ylabel("F")
    ax.set_title(f"{report.contrast.key}: {report.method}, alpha={report.alpha:g}")
    ax.legend(loc="best", fontsize="small")
    return _save_fig(fig, path)


def plot_heatmap(table: HeatmapTable, statistic: str, path: Union[str, Path]) -> Path:
    """Groups × variates image of one heatmap statistic."""
    matrix = table.matrix(statistic)
    width = max(6.0, 0.45 * len(table.variate_labels))
    fig, ax = plt.subplots(figsize=(width, max(3.0, 0.45 * len(table.group_labels))))
    im = ax.imshow(matrix, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(table.variate_labels)), table.variate_labels, rotation=90, fontsize="small")
    ax.set_yticks(range(len(table.group_labels)), table.group_labels, fontsize="small")
    cbar = plt.colorbar(im, ax=ax)
    cbar.set_label(statistic)
    ax.set_title(f"{statistic} per group and variate")
    return _save_fig(fig, path)


def plot_sweep(report: SweepReport, measure: str, path: Union[str, Path]) -> Path:
    """Mean of one measurement across noise levels, one line per (method, sample size)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    lines: dict[str, list[tuple[float, float]]] = {}
    for entry in report.summary():
        name = entry["method"] if entry["k"] is None else f"{entry['method']} K={entry['k']}"
        lines.setdefault(name, []).append((entry["sd"], entry[measure]))
    for name, points in lines.items():
        sd, value = zip(*points)
        ax.plot(sd, value, marker="o", label=name)
    ax.set_xlabel("noise sd")
    ax.set_ylabel(measure.replace("_", " "))
    ax.legend(loc="best", fontsize="small")
    return _save_fig(fig, path)
