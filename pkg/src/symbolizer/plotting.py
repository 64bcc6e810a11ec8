"""Report figures, written next to the CSV/Markdown outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .eval import STAGES, ScoreReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# PNG metadata otherwise embeds the matplotlib version string
_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_grounding(report: ScoreReport, path: str | Path) -> Path:
    """Grouped bars of mean F1 per domain and stage."""
    stages = [s for s in STAGES if any(r["stage"] == s for r in report.rows)]
    domains = report.domains
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.5, 1.2 * len(domains) + 1), 2.6))
        width = 0.8 / max(len(stages), 1)
        for i, stage in enumerate(stages):
            xs = [j + (i - (len(stages) - 1) / 2) * width for j in range(len(domains))]
            ax.bar(xs, [report.mean("f1", stage, d) for d in domains], width, label=stage)
        ax.set_xticks(range(len(domains)))
        ax.set_xticklabels(domains)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("F1")
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_sweep(rows: Sequence[dict], path: str | Path, stages: Sequence[str] = STAGES) -> Path:
    """Mean recall and F1 against the mock drop probability."""
    eps = [r["epsilon"] for r in rows]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(6.0, 2.6), sharey=True)
        for ax, metric in zip(axes, ("recall", "f1")):
            for s in stages:
                key = f"{s}_{metric}"
                if rows and key in rows[0]:
                    ax.plot(eps, [r[key] for r in rows], marker="o", ms=3, label=s)
            if metric == "recall":
                ax.plot(eps, [1 - e for e in eps], "k--", lw=0.8, label="1 - eps")
            ax.set_xlabel("drop probability")
            ax.set_title(metric)
        axes[0].set_ylabel("mean score")
        axes[0].legend(frameon=False)
        return _save(fig, path)


def plot_planning(report: ScoreReport, path: str | Path) -> Path:
    """Success rate per domain, one bar group per mode."""
    modes = sorted({r["mode"] for r in report.rows})
    domains = report.domains
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.5, 1.2 * len(domains) + 1), 2.6))
        width = 0.8 / max(len(modes), 1)
        for i, mode in enumerate(modes):
            vals = []
            for d in domains:
                rows = [r for r in report.rows if r["domain"] == d and r["mode"] == mode]
                vals.append(sum(r["solved"] for r in rows) / len(rows) if rows else 0.0)
            xs = [j + (i - (len(modes) - 1) / 2) * width for j in range(len(domains))]
            ax.bar(xs, vals, width, label=mode)
        ax.set_xticks(range(len(domains)))
        ax.set_xticklabels(domains)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("success rate")
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)
