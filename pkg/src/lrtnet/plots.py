"""Render training-evolution figures next to the CSV artifacts.

One figure holds three panels: class-1 error, class-2 error and their
average versus iteration, each optionally annotated with the exact optimal
error as a dashed reference line.  Several runs can share the figure for
side-by-side method comparison.
"""

import matplotlib

matplotlib.use("Agg")  # file output only, no display server

import matplotlib.pyplot as plt

_PANELS = (
    ("err1", "error under class 1"),
    ("err2", "error under class 2"),
    ("avg", "average error"),
)


def render_evolution(logs, out_path, lrt=None, title=None):
    """Write a three-panel error-evolution figure as PNG.

    ``logs`` maps a curve label to an EvolutionLog (a single log is also
    accepted); ``lrt`` is an optional ErrorRates whose exact values are
    drawn as dashed reference lines.
    """
    if not isinstance(logs, dict):
        logs = {"": logs}
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharex=True)
    for ax, (column, label) in zip(axes, _PANELS):
        for name, log in logs.items():
            ax.plot(log.column("iteration"), log.column(column),
                    label=name or None, linewidth=1.2)
        if lrt is not None:
            ax.axhline(getattr(lrt, column), color="black", linestyle="--",
                       linewidth=1.0, label="optimal")
        ax.set_xlabel("iteration")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    handles, labels = axes[0].get_legend_handles_labels()
    if labels:
        axes[0].legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
