"""Figure rendering for benchmark CSVs: success-rate curves, accuracy curves,
and prediction heatmaps. SVG output is deterministic: fixed hash salt, no
timestamp metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METHOD_COLORS = {
    "kline": "#e6b012",
    "empm-one-shot": "#1f77b4",
    "empm-sequential": "#16508c",
}

_FIGSIZE = (5.2, 3.6)


def _configure():
    plt.rcParams["svg.hashsalt"] = "hadrec"
    plt.rcParams["svg.fonttype"] = "path"
    plt.rcParams["font.size"] = 9


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def plot_success_curves(rows: list[dict], path, title: str | None = None) -> None:
    """Success rate vs number of zeroed entries, one curve per method.

    Accepts parsed results rows; cross-class rows (with a `run` field) are
    aggregated into a mean line with a 95% confidence band.
    """
    _configure()
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    methods = sorted({r["method"] for r in rows})
    has_runs = rows and "run" in rows[0]
    for method in methods:
        sub = [r for r in rows if r["method"] == method]
        ks = sorted({r["k"] for r in sub})
        color = METHOD_COLORS.get(method)
        if has_runs:
            means, halves = [], []
            for k in ks:
                rates = [r["rate"] for r in sub if r["k"] == k]
                mean = float(np.mean(rates))
                sigma = float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0
                means.append(mean)
                halves.append(1.96 * sigma / np.sqrt(len(rates)) if len(rates) > 1 else 0.0)
            means = np.array(means)
            halves = np.array(halves)
            ax.plot(ks, means, label=method, color=color)
            ax.fill_between(ks, means - halves, means + halves, alpha=0.25, color=color)
        else:
            rates = [next(r["rate"] for r in sub if r["k"] == k) for k in ks]
            ax.plot(ks, rates, marker="o", markersize=2.5, label=method, color=color)
    ax.set_xlabel("zeroed-out entries")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_hcp_curve(rows: list[dict], path, title: str | None = None) -> None:
    """Highest-confidence-prediction accuracy vs number of zeroed entries."""
    _configure()
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ks = sorted({r["k"] for r in rows})
    acc = [next(r["accuracy"] for r in rows if r["k"] == k) for k in ks]
    ax.plot(ks, acc, marker="o", markersize=2.5, color="#1f77b4")
    ax.set_xlabel("zeroed-out entries")
    ax.set_ylabel("HCP accuracy")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_heatmap(masked, target, prediction: np.ndarray, path) -> None:
    """Three panels (input, target, prediction) on a shared diverging scale:
    -1 dark, +1 bright."""
    _configure()
    fig, axes = plt.subplots(1, 3, figsize=(8.4, 2.9))
    panels = [
        ("input", masked.entries.astype(float)),
        ("target", target.entries.astype(float)),
        ("prediction", prediction),
    ]
    for ax, (label, grid) in zip(axes, panels):
        im = ax.imshow(grid, cmap="viridis", vmin=-1.0, vmax=1.0)
        ax.set_title(label)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes, shrink=0.85)
    _save(fig, path)
