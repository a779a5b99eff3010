"""Static figures for sweep results, rendered next to the CSV output.

Figures are line plots of one sweep metric over the pi_b grid, one
series per situation.  Rendering is deterministic: the Agg backend, a
fixed SVG hash salt, and a stripped creation date make repeated renders
of the same result byte-identical, so figures can be golden-file
tested like any other artifact.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .simulation import SweepResult

#: Metrics plottable against the pi_b grid.
PLOTTABLE_METRICS = (
    "coverage", "mean_width", "mse", "rel_bias", "varest_rel_bias", "acceptance_rate",
)

_SVG_HASHSALT = "hiddenfactor"


def plot_sweep_metric(result: SweepResult, metric: str, path) -> None:
    """Render one metric of a sweep as a deterministic SVG line plot."""
    if metric not in PLOTTABLE_METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {PLOTTABLE_METRICS}")
    if not result.rows:
        raise ValueError("sweep result has no rows to plot")

    situations = []
    for row in result.rows:
        if row.situation not in situations:
            situations.append(row.situation)

    with plt.rc_context({"svg.hashsalt": _SVG_HASHSALT}):
        fig, ax = plt.subplots(figsize=(8.0, 5.0))
        try:
            for situation in situations:
                points = [
                    (row.pi_b, getattr(row, metric))
                    for row in result.rows
                    if row.situation == situation
                ]
                xs, ys = zip(*points)
                (line,) = ax.plot(xs, ys, marker="o", label=f"situation {situation}")
                line.set_gid(f"series-{situation}")
            ax.set_xlabel("pi_b")
            ax.set_ylabel(metric)
            ax.set_title(f"{metric} ({result.config.model.kind})")
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


def emit_figures(result: SweepResult, out_dir, metrics=("coverage", "mean_width")):
    """Render the requested metrics into ``out_dir``; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric in metrics:
        path = out / f"{metric}.svg"
        plot_sweep_metric(result, metric, path)
        paths.append(path)
    return paths
