"""Figure rendering for benchmark and classification reports.

Report scoring itself stays plot-free; the CLI calls into this module to
drop a PNG next to the delimited output of every run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalkit import BenchmarkReport

_SETTING_ORDER = {"easy": 0, "medium": 1, "hard": 2, "hardest": 3, "nway": 4}


def render_matching_figure(report: BenchmarkReport, path) -> Path:
    """Grouped accuracy bars per setting with Wilson 95% error bars."""
    settings = sorted(
        {r.setting for r in report.rows},
        key=lambda s: (_SETTING_ORDER.get(s, 99), s),
    )
    series = sorted({(r.method, r.assignment) for r in report.rows})
    by_cell = {(r.method, r.assignment, r.setting): r for r in report.rows}

    x = np.arange(len(settings), dtype=float)
    width = 0.8 / max(1, len(series))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(settings)), 4.0))
    for si, (method, assignment) in enumerate(series):
        heights, lo_err, hi_err = [], [], []
        for s in settings:
            r = by_cell.get((method, assignment, s))
            if r is None:
                heights.append(0.0)
                lo_err.append(0.0)
                hi_err.append(0.0)
            else:
                heights.append(r.accuracy_pct)
                lo_err.append(max(0.0, r.accuracy_pct - r.wilson_95_interval[0]))
                hi_err.append(max(0.0, r.wilson_95_interval[1] - r.accuracy_pct))
        offset = (si - (len(series) - 1) / 2.0) * width
        ax.bar(
            x + offset,
            heights,
            width=width * 0.95,
            yerr=[lo_err, hi_err],
            capsize=2,
            label=f"{method} [{assignment}]",
        )
    ax.set_xticks(x)
    ax.set_xticklabels(settings)
    ax.set_ylabel("matching accuracy [%]")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_classification_figure(top1: float, top5: float, path) -> Path:
    """Two-bar summary of a zero-shot classification run."""
    fig, ax = plt.subplots(figsize=(4.0, 3.5))
    ax.bar(["top-1", "top-5"], [top1, top5], color=["#3b6ea5", "#77a8d6"])
    for i, v in enumerate([top1, top5]):
        ax.text(i, v + 1.5, f"{v:.2f}", ha="center", fontsize=9)
    ax.set_ylabel("accuracy [%]")
    ax.set_ylim(0, 105)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
