"""Report figures (PNG, Agg backend).

These accompany the delimited outputs of the report-producing commands.
Unlike the SVG export they make no byte-stability promise; they exist to
be looked at.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dialectogram import Dialectogram
from .measures import MeasureTable

EC_COLORS = {
    "both": "#7b3294",
    "only1": "#c0392b",
    "only2": "#1f6fb2",
    "neither": "#8d9399",
}


def dialectogram_png(d: Dialectogram, path: str | Path, label_top: int = 40, dpi: int = 130) -> None:
    fig, ax = plt.subplots(figsize=(10.0, 7.5))
    for cls, color in EC_COLORS.items():
        rows = [r for r in d.records if r.ec_class == cls]
        if not rows:
            continue
        x = [r.alpha1 for r in rows]
        y = [r.alpha2 for r in rows]
        size = [12 * np.sqrt((r.freq1 + r.freq2) / 2.0) ** 0.5 for r in rows]
        ax.scatter(x, y, s=size, c=color, alpha=0.75, label=f"co-occurs: {cls}", edgecolors="none")
    lims = ax.get_xlim() + ax.get_ylim()
    lo, hi = (min(lims), max(lims)) if d.records else (-1.0, 1.0)
    ax.plot([lo, hi], [lo, hi], ls="--", c="#5f6368", lw=1.2)
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    ranked = sorted(d.records, key=lambda r: (-(abs(r.alpha1) + abs(r.alpha2)), r.token))
    for r in ranked[:label_top]:
        ax.annotate(r.token, (r.alpha1, r.alpha2), fontsize=7, alpha=0.9)
    ax.set_xlabel(f"projection in corpus 1 ({d.focal} -> {d.translation_1to2})")
    ax.set_ylabel(f"projection in corpus 2 ({d.focal} -> {d.translation_2to1})")
    if d.records:
        ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": "dialectoscope"})
    plt.close(fig)


def measure_frequency_png(table: MeasureTable, path: str | Path, dpi: int = 130) -> None:
    """One panel per measure against log mean frequency."""
    names = list(MeasureTable.MEASURES)
    fig, axes = plt.subplots(1, len(names), figsize=(4.0 * len(names), 3.6), sharex=True)
    logf = table.vocab.log_mean_freq
    for ax, name in zip(np.atleast_1d(axes), names):
        v = table.measure(name)
        keep = ~np.isnan(v)
        ax.scatter(logf[keep], v[keep], s=6, alpha=0.4, c="#1f6fb2", edgecolors="none")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("log mean frequency", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": "dialectoscope"})
    plt.close(fig)


def loss_trace_png(traces: dict[str, list[float]], path: str | Path, dpi: int = 130) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, trace in sorted(traces.items()):
        ax.plot(range(1, len(trace) + 1), trace, marker="o", ms=3, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean weighted squared error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": "dialectoscope"})
    plt.close(fig)


def swap_report_png(report, path: str | Path, dpi: int = 130) -> None:
    """Correlation bars per measure plus translation accuracy by bucket."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11.0, 4.2))
    measures = sorted({r.measure for r in report.correlations})
    width = 0.38
    xs = np.arange(len(measures))
    for k, scope in enumerate(("all", "swapped")):
        vals = []
        for m in measures:
            row = next(r for r in report.correlations if r.measure == m and r.scope == scope)
            vals.append(0.0 if row.rho is None else row.rho)
        ax1.bar(xs + (k - 0.5) * width, vals, width, label=scope)
    ax1.set_xticks(xs)
    ax1.set_xticklabels(measures, rotation=30, ha="right", fontsize=7)
    ax1.set_ylabel("spearman rho vs swap degree")
    ax1.axhline(0.0, c="#202124", lw=0.8)
    ax1.legend(fontsize=8)

    buckets = list(report.translation.buckets.items())
    names = [b for b, _ in buckets] + ["exactly_half (self)"]
    accs = [0.0 if acc is None else acc for _, (_, acc) in buckets]
    accs.append(report.translation.half_self_rate or 0.0)
    ax2.bar(range(len(names)), accs, color="#1f6fb2")
    ax2.set_xticks(range(len(names)))
    ax2.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
    ax2.set_ylim(0, 1.05)
    ax2.set_ylabel("translation accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata={"Software": "dialectoscope"})
    plt.close(fig)
