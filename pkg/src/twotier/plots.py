"""Figure rendering for run reports.

Every run directory gets figures next to its delimited output: training
curves, the task accuracy matrix, and the direct-versus-iterative cost
comparison.  All rendering targets files via the Agg backend; nothing here
opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .costs import CostReport, _sgd_epoch_macs
from .upper import EpochRecord

FIG_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def save_training_curves(records: list[EpochRecord], path: str | Path) -> Path:
    """Loss and consolidation penalty over the whole sequence."""
    steps = np.arange(len(records))
    loss = [r.train_loss for r in records]
    penalty = [r.ewc_penalty for r in records]
    boundaries = [i for i in range(1, len(records)) if records[i].task != records[i - 1].task]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.plot(steps, loss, lw=1.2, color="tab:blue")
    ax1.set_ylabel("train cross-entropy")
    ax2.plot(steps, penalty, lw=1.2, color="tab:orange")
    ax2.set_ylabel("consolidation penalty")
    ax2.set_xlabel("epoch (all tasks, concatenated)")
    for ax in (ax1, ax2):
        for b in boundaries:
            ax.axvline(b - 0.5, color="gray", lw=0.8, ls="--")
        ax.grid(alpha=0.3)
    fig.suptitle("Head training")
    return _save(fig, Path(path))


def save_accuracy_matrix(matrix: np.ndarray, path: str | Path) -> Path:
    """Heatmap of accuracy on task tau (column) after training task t (row)."""
    t = matrix.shape[0]
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * t, 0.8 + 0.8 * t))
    shown = np.ma.masked_invalid(matrix)
    im = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap="viridis")
    for i in range(t):
        for j in range(i + 1):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                    color="white" if matrix[i, j] < 0.6 else "black", fontsize=8)
    ax.set_xlabel("evaluated task")
    ax.set_ylabel("after training task")
    ax.set_xticks(range(t))
    ax.set_yticks(range(t))
    fig.colorbar(im, ax=ax, shrink=0.8, label="test accuracy")
    ax.set_title("Accuracy matrix")
    return _save(fig, Path(path))


def save_cost_report(report: CostReport, n_rows: int, h: int, k: int, path: str | Path,
                     head_hidden: int = 0) -> Path:
    """Direct-fit cost against the iterative cost as epochs accumulate."""
    upper = max(int(report.crossover_epochs * 2), 4)
    epochs = np.arange(1, upper + 1)
    sgd = epochs * _sgd_epoch_macs(n_rows, h, k, head_hidden)

    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(epochs, sgd, lw=1.5, color="tab:orange", label="iterative head (cumulative)")
    ax.axhline(report.direct_macs, color="tab:blue", lw=1.5, label="direct single-pass fit")
    ax.axvline(report.crossover_epochs, color="gray", lw=0.8, ls="--",
               label=f"crossover at {report.crossover_epochs} epochs")
    ax.set_xlabel("training epochs")
    ax.set_ylabel("multiply-accumulate ops")
    ax.set_title("Op cost: direct fit vs iterative training")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))
