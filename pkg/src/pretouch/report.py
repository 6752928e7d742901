"""Evaluation figures: pose-error curves rendered to PNG files.

Rendering is headless and deterministic: fixed figure geometry, artists
driven only by the report data, no timestamps or environment-dependent
styling, so identical reports produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import EvalReport


def render_error_curves(
    entries: list[tuple[str, str, EvalReport]], mode: str, path: str
) -> None:
    """Plot pose error per scan for each (object, proposer) series.

    mode "sequential" puts percent scanned on the x axis (the error curve as
    coverage grows); "single" uses the scan index. Each series also draws its
    baseline as a dashed line in the same color: the error of trusting the
    prior pose without scanning at all.
    """
    if mode not in ("single", "sequential"):
        raise ValueError(f"unknown figure mode {mode!r}")
    if not entries:
        raise ValueError("render_error_curves needs at least one report")
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    for object_id, proposer, report in entries:
        if mode == "sequential":
            xs = [100.0 * r.percent_scanned for r in report.results]
        else:
            xs = [float(r.scan_index) for r in report.results]
        ys = [r.pose_error for r in report.results]
        (line,) = ax.plot(xs, ys, marker="o", markersize=3, label=f"{object_id}/{proposer}")
        ax.axhline(
            report.baseline_error, color=line.get_color(), linestyle="--", linewidth=0.8
        )
    ax.set_xlabel("percent scanned (%)" if mode == "sequential" else "scan index")
    ax.set_ylabel("pose error (cm)")
    ax.set_ylim(bottom=0.0)
    ax.grid(True, linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    try:
        fig.savefig(path, format="png")
    finally:
        plt.close(fig)
