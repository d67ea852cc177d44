"""Figures for benchmark reports."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import TABLE_COLUMNS, BenchRecord  # noqa: E402
from .geometry import table_order_key  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.linewidth": 0.8,
    "figure.dpi": 110,
}

PALETTE = ["#0C5DA5", "#00A08A", "#F2AD00", "#F98400", "#5BBCD6", "#B40F20"]


def finalize_axes(ax):
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    ax.grid(axis="y", alpha=0.25, linewidth=0.5, linestyle="--")
    ax.tick_params(direction="out", length=3, width=0.7)


def plot_bench(records: list[BenchRecord], path: str | os.PathLike, title: str | None = None):
    """Grouped bars of ns per iteration: one group per geometry, one bar per column.

    Cells without a record are left empty. Returns ``path``.
    """
    cells = {(r.geometry, r.implementation): r for r in records}
    geometries = sorted({r.geometry for r in records}, key=table_order_key)
    width = 0.8 / len(TABLE_COLUMNS)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 3.4))
        for k, (impl, label) in enumerate(TABLE_COLUMNS):
            xs, ys = [], []
            for x, geo in enumerate(geometries):
                rec = cells.get((geo, impl))
                if rec is not None:
                    xs.append(x + (k - 1) * width)
                    ys.append(rec.ns_per_iter)
            ax.bar(xs, ys, width=width, label=label, color=PALETTE[k % len(PALETTE)])
        ax.set_xticks(range(len(geometries)))
        ax.set_xticklabels([g.name for g in geometries])
        ax.set_xlabel("vector bits x lane bits")
        ax.set_ylabel("ns per block iteration")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, ncols=3, loc="upper center", bbox_to_anchor=(0.5, 1.16))
        finalize_axes(ax)
        fig.tight_layout()
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
    return path
