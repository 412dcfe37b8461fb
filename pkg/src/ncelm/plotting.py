"""Figures written next to the CSV reports.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
touches pyplot state or needs a display.
"""

import math

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def new_figure(width=6.0, height=None):
    fig = Figure(figsize=(width, height or width * GOLDEN))
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _positive(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None and y > 0 and math.isfinite(y)]
    return [p[0] for p in pts], [p[1] for p in pts]


def plot_trace(trace, path):
    """Inter-iteration distances (L1 and squared L2) against iteration, log scale."""
    fig, ax = new_figure()
    r = trace.column("r")
    for name, label in (("d_l1", "L1 distance"), ("d_l2", "squared L2 distance")):
        x, y = _positive(r, trace.column(name))
        if x:
            ax.semilogy(x, y, marker="o", label=label)
    ax.set_xlabel("iteration r")
    ax.set_ylabel("distance between consecutive iterates")
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_sweep(curves, path):
    """One L1-distance curve per lambda; ``curves`` maps lambda -> (r list, d_l1 list)."""
    fig, ax = new_figure()
    for lam, (r, d) in curves.items():
        x, y = _positive(r, d)
        if x:
            ax.semilogy(x, y, marker="o", label=f"lambda = {lam:g}")
    ax.set_xlabel("iteration r")
    ax.set_ylabel("L1 norm of weight difference")
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path
