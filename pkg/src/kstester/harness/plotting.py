"""Figures written next to the CSV reports."""

from __future__ import annotations

import math
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..sketch import TesterConfig  # noqa: E402
from .runner import HypothesisSummary, memory_report  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(width=4.5, height=None):
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def plot_rejection_rates(summaries: Sequence[HypothesisSummary], eps: float, path: str) -> str:
    """Empirical rejection rate per hypothesis with 3-sigma binomial bars."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        pts = sorted(summaries, key=lambda s: s.distance)
        xs = [s.distance for s in pts]
        ys = [s.reject_rate for s in pts]
        err = [3.0 * math.sqrt(max(y * (1 - y), 1e-12) / s.trials) for y, s in zip(ys, pts)]
        ax.errorbar(xs, ys, yerr=err, fmt="o-", color="k", ms=4, capsize=3, lw=1)
        ax.axhline(0.1, color="tab:blue", ls="--", lw=0.8, label="0.1 (null target)")
        ax.axhline(0.9, color="tab:red", ls="--", lw=0.8, label="0.9 (power target)")
        ax.axvline(eps, color="0.6", ls=":", lw=0.8, label=f"eps = {eps:g}")
        ax.set_xlabel("Kolmogorov distance to reference")
        ax.set_ylabel("rejection rate")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="center right", frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_memory(eps_values: Sequence[float], path: str) -> str:
    """Predicted peak words against ``lg(1/eps)`` with a ``lg**4`` guide."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        lg = [math.log2(1.0 / e) for e in eps_values]
        words = [memory_report(TesterConfig(eps=e)) for e in eps_values]
        ax.loglog(lg, words, "o-", color="k", ms=4, lw=1, label="peak live words")
        scale = words[-1] / lg[-1] ** 4
        ax.loglog(lg, [scale * v**4 for v in lg], "--", color="tab:red", lw=0.8,
                  label="lg(1/eps)^4, scaled")
        ax.set_xlabel("lg(1/eps)")
        ax.set_ylabel("words")
        ax.legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)
    return path


def experiment_figures(summaries: Sequence[HypothesisSummary], eps: float, outdir: str) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    return [plot_rejection_rates(summaries, eps, os.path.join(outdir, "rejection_rates.png"))]
