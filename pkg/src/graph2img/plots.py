"""Figure rendering for reports: channel images, fold accuracies, training curves.

Everything renders straight to files with the Agg backend; nothing here opens
a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def channel_pngs(image_tensor, path_prefix, cmap: str = "gray_r"):
    """One grayscale PNG per channel of a (C, H, W) tensor.

    Rows index the second coordinate of a channel's dimension pair, so the
    origin sits at the lower left like a scatter plot of the coordinates.
    """
    tensor = np.asarray(image_tensor)
    paths = []
    for k, channel in enumerate(tensor):
        path = Path(f"{path_prefix}_channel{k}.png")
        fig, ax = plt.subplots(figsize=(3, 3))
        ax.imshow(channel, cmap=cmap, origin="lower", interpolation="nearest")
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(f"channel {k}", fontsize=9)
        fig.savefig(path, bbox_inches="tight", dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def fold_accuracy_figure(accuracies_by_method: dict, path):
    """Box plot of per-fold accuracies, one box per method."""
    names = sorted(accuracies_by_method)
    data = [np.asarray(accuracies_by_method[name], dtype=float) for name in names]
    fig, ax = plt.subplots(figsize=(1.2 + 1.3 * len(names), 3.2))
    ax.boxplot(data, tick_labels=names, widths=0.5)
    for i, values in enumerate(data, start=1):
        jitter = (np.arange(len(values)) % 7 - 3) * 0.02
        ax.plot(np.full(len(values), i) + jitter, values, ".", color="tab:blue",
                alpha=0.5, markersize=4)
    ax.set_ylabel("fold accuracy")
    ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return Path(path)


def history_figure(history_rows, path):
    """Loss and accuracy curves from per-epoch history dicts."""
    epochs = [row["epoch"] for row in history_rows]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(8, 3))
    ax_loss.plot(epochs, [row["train_loss"] for row in history_rows], label="train")
    ax_loss.plot(epochs, [row["val_loss"] for row in history_rows], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy")
    ax_loss.legend(fontsize=8)
    ax_loss.grid(alpha=0.3)
    ax_acc.plot(epochs, [row["train_acc"] for row in history_rows], label="train")
    ax_acc.plot(epochs, [row["val_acc"] for row in history_rows], label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend(fontsize=8)
    ax_acc.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return Path(path)
