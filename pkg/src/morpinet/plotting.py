"""
Report figures rendered to PNG with the non-interactive Agg backend.
"""

from __future__ import annotations

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .core import Trajectory2D  # noqa: E402

_STYLE = {"ins2d": ":", "ins3d": ":", "morpi-a": "--", "morpi-g": "--", "morpinet": "-"}


def _save(fig, path):
    # no timestamp or version metadata, so reruns give identical files
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_overlay(path, trajectories: dict, gt: Trajectory2D | None = None, title=""):
    """East-north overlay of estimated trajectories against ground truth.

    Estimates far outside the ground-truth extent (drifting INS runs) are
    clipped by fixing the axes to the ground truth with a margin.
    """
    fig, ax = plt.subplots(figsize=(6, 6))
    if gt is not None:
        ax.plot(gt.y, gt.x, color="k", lw=2, label="ground truth")
    for name, tr in trajectories.items():
        ax.plot(tr.y, tr.x, _STYLE.get(name, "-"), lw=1.2, label=name)
        ax.plot(tr.y[-1:], tr.x[-1:], "o", ms=4, color=ax.lines[-1].get_color())
    if gt is not None and len(gt) > 1:
        span = max(float(gt.x.max() - gt.x.min()), float(gt.y.max() - gt.y.min()), 1.0)
        m = 0.25 * span
        ax.set_xlim(gt.y.min() - m, gt.y.max() + m)
        ax.set_ylim(gt.x.min() - m, gt.x.max() + m)
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_aspect("equal", adjustable="box")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_metrics(path, summary_rows, metrics=("prmse", "pmae")):
    """Grouped bar chart of summary metrics per method (log scale when the
    values span more than two decades)."""
    methods = [r["method"] for r in summary_rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(metrics), 1)
    vals_all = []
    for j, m in enumerate(metrics):
        vals = [r[m] for r in summary_rows]
        vals_all += [v for v in vals if v == v and v > 0]
        xs = [i + (j - (len(metrics) - 1) / 2) * width for i in range(len(methods))]
        ax.bar(xs, [0 if v != v else v for v in vals], width, label=m.upper())
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods)
    ax.set_ylabel("error [m]")
    if vals_all and max(vals_all) / min(vals_all) > 100:
        ax.set_yscale("log")
    ax.grid(axis="y", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_errors_over_time(path, trajectories: dict, gt: Trajectory2D):
    """Position error norm against time for each method."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, tr in trajectories.items():
        ok = (tr.t >= gt.t[0]) & (tr.t <= gt.t[-1])
        if not ok.any():
            continue
        e = np.hypot(tr.x[ok] - np.interp(tr.t[ok], gt.t, gt.x),
                     tr.y[ok] - np.interp(tr.t[ok], gt.t, gt.y))
        ax.plot(tr.t[ok], e, _STYLE.get(name, "-"), label=name)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("position error [m]")
    vals = [line.get_ydata() for line in ax.lines]
    if vals and max(max(v) for v in vals) > 100 * max(min(max(v) for v in vals), 1e-9):
        ax.set_yscale("symlog", linthresh=1.0)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)

