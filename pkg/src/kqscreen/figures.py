"""Figure rendering for the report-producing commands.

Figures are a convenience layer next to the delimited outputs; every number
they show is also available in the JSON/CSV artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_training_curves(history: list[dict], path: str | Path, title: str = "Training") -> None:
    """Loss and test-accuracy curves, one panel each."""
    if not history:
        return
    epochs = [h["epoch"] for h in history]
    loss = [h["train_loss"] for h in history]
    acc = [h["test_acc"] for h in history]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_loss.plot(epochs, loss, color="tab:red")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_acc.plot(epochs, acc, color="tab:blue")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("test accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_latent_scatter(latents: np.ndarray, labels: np.ndarray, path: str | Path,
                          silhouette: float | None = None) -> None:
    """2-d latent vectors colored by true class."""
    latents = np.atleast_2d(latents)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    for value, name, color in ((0, "anomaly", "tab:red"), (1, "normal", "tab:blue")):
        mask = labels == value
        if mask.any():
            ax.scatter(latents[mask, 0], latents[mask, 1], s=8, alpha=0.6, label=name, color=color)
    ax.set_xlabel("latent 0")
    ax.set_ylabel("latent 1")
    title = "Latent space"
    if silhouette is not None:
        title += f" (silhouette {silhouette:.3f})"
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
