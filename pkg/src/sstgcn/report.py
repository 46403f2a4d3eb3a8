"""Figure rendering for the CLI: every delimited report gets a PNG sibling."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_history(history: list[dict], path) -> None:
    """Loss curves and validation AUC over epochs."""
    epochs = [row["epoch"] for row in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(epochs, [row["train_loss"] for row in history], label="train loss")
    ax1.plot(epochs, [row["val_loss"] for row in history], label="val loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("binary cross entropy")
    ax1.legend()
    ax2.plot(epochs, [row["val_auc"] for row in history], color="tab:green")
    best = history[0].get("best_epoch")
    if best:
        ax2.axvline(best, color="gray", linestyle=":", linewidth=1, label=f"best epoch {best}")
        ax2.legend()
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation AUC")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_roc(points: list[tuple[float, float]], auc_value: float, path) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 4))
    ax.plot([p[0] for p in points], [p[1] for p in points], drawstyle="steps-post")
    ax.plot([0, 1], [0, 1], color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"ROC (AUC = {auc_value:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metric_bars(labels: list[str], values: list[float], ylabel: str, path) -> None:
    """One bar per experiment row (grid cells or preprocessing variants)."""
    fig, ax = plt.subplots(figsize=(max(4.0, 0.32 * len(labels) + 1.5), 3.8))
    ax.bar(range(len(labels)), values, color="tab:blue")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
