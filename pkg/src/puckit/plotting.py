"""Report figures.

Figures are drawn on the Agg canvas directly (no pyplot state) and saved
without a Software tag so that reruns write identical PNG bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
}
METRIC_COLORS = {"precision": "#1b6ca8", "recall": "#d1495b", "f1": "#3a7d44", "ap": "#7a5195"}


def _new_figure(width: float = 6.4, height: float = 3.6) -> Figure:
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


@mpl.rc_context(STYLE)
def plot_eval_report(report, out_dir, prefix: str = "report") -> list[Path]:
    """Per-fold metric spread across seeds, with the ensembled value marked.

    Writes ``<prefix>_folds.png``.
    """
    out_dir = Path(out_dir)
    metrics = ["precision", "recall", "f1"] + (["ap"] if report.ranking else [])
    folds = sorted({r["fold"] for r in report.per_fold})
    fig = _new_figure(max(4.0, 1.2 * len(folds) + 2.5), 3.6)
    ax = fig.add_subplot(1, 1, 1)
    width = 0.8 / len(metrics)
    ens = {r["fold"]: r for r in report.ensembled["per_fold"]}
    for j, m in enumerate(metrics):
        xs, ys = [], []
        for f in folds:
            vals = [r[m] for r in report.per_fold if r["fold"] == f and r.get(m) is not None]
            xs += [f - 0.4 + width * (j + 0.5)] * len(vals)
            ys += vals
        ax.scatter(xs, ys, s=10, alpha=0.6, color=METRIC_COLORS[m], label=m)
        ex = [f - 0.4 + width * (j + 0.5) for f in folds if ens[f].get(m) is not None]
        ey = [ens[f][m] for f in folds if ens[f].get(m) is not None]
        ax.scatter(ex, ey, marker="_", s=120, color=METRIC_COLORS[m])
    names = report.plan.get("names") or [str(f) for f in folds]
    ax.set_xticks(folds)
    ax.set_xticklabels(names, rotation=0)
    ax.set_ylim(-0.02, 1.02)
    ax.set_ylabel("score")
    ax.set_title(f"{report.mode}: per-seed scores (dots) and ensemble (bars), {len(report.seeds)} seeds")
    ax.legend(loc="lower left", ncol=len(metrics), frameon=False)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return [_save(fig, out_dir / f"{prefix}_folds.png")]


@mpl.rc_context(STYLE)
def plot_weights(estimates, conversion=None, path=None) -> Optional[Path]:
    """Unlabelled weights sorted descending; converted samples highlighted."""
    raw = estimates.raw_weights or estimates.weights
    if not raw:
        return None
    ids = np.array(sorted(raw, key=lambda i: (-raw[i], i)))
    vals = np.array([raw[i] for i in ids])
    fig = _new_figure(6.0, 3.4)
    ax = fig.add_subplot(1, 1, 1)
    rank = np.arange(1, ids.size + 1)
    ax.plot(rank, np.clip(vals, 0, 1), color="#1b6ca8", lw=1.2, label="w(x), clamped")
    if conversion is not None and conversion.converted_ids:
        n = len(conversion.converted_ids)
        ax.axvspan(0.5, n + 0.5, color="#d1495b", alpha=0.15, label=f"converted ({n})")
    ax.set_xlabel("rank among unlabelled samples")
    ax.set_ylabel("weight")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"c = {estimates.c:.4f}, estimated prior = {estimates.prior:.4f}")
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    return _save(fig, path)
