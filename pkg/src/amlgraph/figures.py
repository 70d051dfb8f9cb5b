"""Matplotlib renderings written next to the delimited report files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import threshold_sweep

_COLORS = {"licit": "#3572b0", "suspicious": "#c0392b"}


def save_size_histogram(size_histogram: dict, path) -> None:
    """Bar chart of subgraph sizes per class from a build report."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.4
    for k, (label, hist) in enumerate(sorted(size_histogram.items())):
        if not hist:
            continue
        sizes = sorted(int(s) for s in hist)
        counts = [hist[str(s)] for s in sizes]
        ax.bar(
            [s + (k - 0.5) * width for s in sizes],
            counts,
            width=width,
            label=label,
            color=_COLORS.get(label),
        )
    ax.set_xlabel("nodes per subgraph")
    ax.set_ylabel("subgraphs")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_curves(history: list[dict], path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    epochs = [h["epoch"] for h in history]
    ax1.plot(epochs, [h["loss"] for h in history], color="#444444")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("training loss")
    ax2.plot(epochs, [h["val_pr_auc"] for h in history], label="val PR-AUC")
    ax2.plot(epochs, [h["val_roc_auc"] for h in history], label="val ROC-AUC")
    ax2.set_xlabel("epoch")
    ax2.set_ylim(0, 1.02)
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_pr_roc(scores, labels, path) -> None:
    """Precision-recall and ROC curves over unique score thresholds."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    thresholds = np.unique(s)
    rows = threshold_sweep(s, y, thresholds=thresholds[::-1])
    prec = [r["precision"] for r in rows]
    rec = [r["recall"] for r in rows]
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    tpr = [r["tp"] / n_pos if n_pos else 0.0 for r in rows]
    fpr = [r["fp"] / n_neg if n_neg else 0.0 for r in rows]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(rec, prec, color=_COLORS["suspicious"])
    ax1.set_xlabel("recall")
    ax1.set_ylabel("precision")
    ax1.set_xlim(0, 1.02)
    ax1.set_ylim(0, 1.02)
    ax2.plot(fpr, tpr, color="#3572b0")
    ax2.plot([0, 1], [0, 1], linestyle=":", color="#999999")
    ax2.set_xlabel("false positive rate")
    ax2.set_ylabel("true positive rate")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_vip_layers(vip, path) -> None:
    """Distribution of nonzero inclusion probabilities per layer."""
    fig, ax = plt.subplots(figsize=(6, 4))
    data = []
    labels = []
    for layer in range(vip.n_layers):
        row = vip.probs[layer, : vip.n_real]
        nz = row[row > 0]
        data.append(nz if len(nz) else np.zeros(1))
        labels.append(str(layer))
    ax.boxplot(data, tick_labels=labels, showfliers=False)
    ax.set_xlabel("layer")
    ax.set_ylabel("inclusion probability (nonzero nodes)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_comm_volume(reports: dict[str, dict], path) -> None:
    """Remote fetch totals for each cache policy variant."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(reports)
    values = [reports[n]["remote_rows_with_cache"] for n in names]
    ax.bar(names, values, color="#3572b0")
    ax.set_ylabel("remote feature rows fetched")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
