"""Matplotlib renderings of the diagnostics tables. Figures are written to
files next to the CSVs; the numeric CSVs remain the contract.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_presence_scatter(
    path: str | Path, pa_counts: np.ndarray, po_counts: np.ndarray, spearman: float
) -> None:
    """Per-species occurrence-record count vs survey presence count, linear
    and log-log side by side."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, logscale in zip(axes, (False, True)):
        ax.scatter(po_counts, pa_counts, s=12, alpha=0.6, edgecolors="none")
        if logscale:
            ax.set_xscale("symlog")
            ax.set_yscale("symlog")
        ax.set_xlabel("record count (presence-only)")
        ax.set_ylabel("survey presence count")
    fig.suptitle(f"Per-species counts, Spearman rho = {spearman:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_f1_per_stratum(path: str | Path, table: dict[str, dict[str, float]]) -> None:
    """Grouped bars: micro F1 per method (groups) and stratum (bars)."""
    methods = sorted(table)
    strata = sorted({s for row in table.values() for s in row})
    width = 0.8 / max(1, len(strata))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(methods)), 4))
    xs = np.arange(len(methods))
    for si, stratum in enumerate(strata):
        vals = [table[m].get(stratum, np.nan) for m in methods]
        ax.bar(xs + si * width, vals, width=width, label=stratum)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(methods, rotation=30, ha="right")
    ax.set_ylabel("micro F1")
    ax.legend(title="stratum", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_accumulation_curves(
    path: str | Path, curves: dict[str, list[tuple[int, float]]]
) -> None:
    """Distinct species vs number of sampled surveys, one line per stratum."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for stratum in sorted(curves):
        pts = curves[stratum]
        ax.plot([n for n, _ in pts], [v for _, v in pts], label=stratum)
    ax.set_xlabel("number of surveys")
    ax.set_ylabel("distinct species")
    ax.legend(title="stratum", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_set_size_bars(path: str | Path, rows: list[dict]) -> None:
    """Per-method absolute error and signed bias of predicted set sizes."""
    methods = [r["method"] for r in rows]
    xs = np.arange(len(methods))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(methods)), 4))
    ax.bar(xs - 0.2, [r["abs_error"] for r in rows], width=0.4, label="abs. error")
    ax.bar(xs + 0.2, [r["bias"] for r in rows], width=0.4, label="bias")
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xticks(xs)
    ax.set_xticklabels(methods, rotation=30, ha="right")
    ax.set_ylabel("set-size error (species)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
