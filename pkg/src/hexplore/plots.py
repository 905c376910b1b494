"""Figures for episode and sweep reports. Files only, no windows."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .mapping import FREE, OCCUPIED, OccupancyGrid  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.dpi": 150,
}

_PANELS = (("explored_m3", "explored (m$^3$)"),
           ("distance_m", "traveled (m)"),
           ("plan_runtime_s", "runtime (s)"))


def episode_figure(metrics, path, title=None):
    """Explored volume, traveled distance and planning runtime against time."""
    t = metrics.column("t_s")
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(3, 1, figsize=(6, 6), sharex=True)
        for ax, (col, label) in zip(axes, _PANELS):
            y = metrics.column(col)
            if col == "plan_runtime_s":
                ax.plot(t, y, lw=0.8, marker=".", ms=2)
            else:
                ax.step(t, y, where="post", lw=1.2)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("time (s)")
        if title:
            axes[0].set_title(title)
        fig.align_ylabels(axes)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def summary_figure(runs, path, labels=None):
    """Overlay of every run's explored-volume curve, plus per-run runtime boxes."""
    labels = labels or [str(i) for i in range(len(runs))]
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(9, 3.5), gridspec_kw={"width_ratios": [3, 2]})
        for m, lab in zip(runs, labels):
            a0.step(m.column("t_s"), m.column("explored_m3"), where="post", lw=1, label=lab)
        a0.set_xlabel("time (s)")
        a0.set_ylabel("explored (m$^3$)")
        if len(runs) <= 10:
            a0.legend(loc="lower right")
        rts = [m.column("plan_runtime_s") for m in runs]
        a1.boxplot(rts, showfliers=False)
        a1.set_xticks(np.arange(1, len(runs) + 1), labels, rotation=90 if len(runs) > 10 else 0)
        a1.set_ylabel("runtime per iteration (s)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def map_figure(grid: OccupancyGrid, path, trace=None):
    """Final map, with the robot's trace if given."""
    img = np.full(grid.states.shape, 0.6)
    img[grid.states == FREE] = 1.0
    img[grid.states == OCCUPIED] = 0.0
    h, w = grid.states.shape
    ext = (grid.origin[0], grid.origin[0] + w * grid.cell_size,
           grid.origin[1], grid.origin[1] + h * grid.cell_size)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 8 * h / w + 0.6))
        ax.imshow(img, cmap="gray", vmin=0, vmax=1, origin="lower", extent=ext, interpolation="nearest")
        if trace:
            xy = np.asarray(trace)
            ax.plot(xy[:, 0], xy[:, 1], lw=0.6, color="tab:red")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
