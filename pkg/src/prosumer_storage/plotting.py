"""Matplotlib rendering of sweep series.

Figures are drawn on an off-screen Agg canvas, so nothing here touches the
global pyplot state or needs a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib as mpl
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GOLDEN = (5 ** 0.5 - 1) / 2
DPI = 150

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "lines.markersize": 4,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

MARKERS = ("o", "s", "^", "D", "v", "x", "+")


def figure_size(width: float = 4.5) -> tuple[float, float]:
    return width, width * GOLDEN


def line_figure(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    path: str | Path | None = None,
) -> Figure:
    """One axis with a marked line per series; saved to ``path`` if given."""
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=figure_size())
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)
        for k, (label, (x, y)) in enumerate(series.items()):
            ax.plot(x, y, marker=MARKERS[k % len(MARKERS)], label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        if path is not None:
            fig.savefig(path, dpi=DPI)
    return fig
