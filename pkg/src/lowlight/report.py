"""Figure rendering for report outputs.

Every CSV the CLI emits can be accompanied by a rendered figure; these
helpers draw them with the Agg backend so they work headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def save_histogram_figures(hists: dict, out_dir, prefix: str = "stats") -> list:
    """One bar-chart PNG per metric histogram; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric, (counts, edges) in hists.items():
        fig, ax = plt.subplots(figsize=(6, 3.5))
        widths = edges[1:] - edges[:-1]
        ax.bar(edges[:-1], counts, width=widths, align="edge", color="#4878a8", edgecolor="none")
        ax.set_xlabel(metric.replace("_", " "))
        ax.set_ylabel("images")
        ax.set_title(f"{metric.replace('_', ' ')} distribution")
        fig.tight_layout()
        path = out / f"{prefix}_{metric}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        paths.append(path)
    return paths


def save_loss_curve(log_csv, out_path) -> Path:
    """Training-loss figure from a train_log.csv: total plus components."""
    steps, series = [], {}
    with open(log_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        numeric = [c for c in reader.fieldnames if c not in ("step", "epoch", "lr")]
        for row in reader:
            steps.append(int(row["step"]))
            for col in numeric:
                series.setdefault(col, []).append(float(row[col]))
    fig, ax = plt.subplots(figsize=(7, 4))
    for col, values in series.items():
        if col == "total":
            ax.plot(steps, values, label=col, color="black", linewidth=2)
        else:
            ax.plot(steps, values, label=col, alpha=0.7, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8, ncol=2)
    ax.set_title("training loss")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def save_factor_chart(rows, out_path) -> Path:
    """Grouped bars of the efficiency factors for each scored resolution."""
    labels = [f"{r['width']}x{r['height']}" for r in rows]
    factor_names = ("tf", "cf", "rf", "e_norm")
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(len(rows))
    width = 0.2
    for i, name in enumerate(factor_names):
        values = [float(r[name]) if r[name] != "" else 0.0 for r in rows]
        ax.bar([xi + (i - 1.5) * width for xi in x], values, width=width, label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("factor value")
    ax.set_title("efficiency factors")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path
