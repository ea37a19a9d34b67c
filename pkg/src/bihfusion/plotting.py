"""Report figures rendered to files with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import DegenerateInput, precision_recall_steps  # noqa: E402

STYLE = {
    "figure.figsize": (4.5, 3.2),
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "legend.frameon": False,
    "legend.fontsize": 8,
}

MODE_COLORS = {
    "none": "#7f7f7f",
    "serial": "#1f77b4",
    "local_gated": "#2ca02c",
    "global_attention": "#d62728",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_training_curves(history: list[dict], path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ep = [h["epoch"] for h in history]
        ax.plot(ep, [h["train_loss"] for h in history], label="train")
        ax.plot(ep, [h["val_loss"] for h in history], label="validation", linestyle="--")
        if history and min(min(h["train_loss"], h["val_loss"]) for h in history) > 0:
            ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_predictions(pred, truth, path, title: str = "") -> Path:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.2))
        ax.scatter(truth, pred, s=10, alpha=0.8)
        lo = float(min(pred.min(), truth.min()))
        hi = float(max(pred.max(), truth.max()))
        ax.plot([lo, hi], [lo, hi], color="k", linewidth=0.6)
        ax.set_xlabel("target")
        ax.set_ylabel("prediction")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_pr_curve(scores, labels, path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.2))
        try:
            precision, recall, _ = precision_recall_steps(scores, labels)
            ax.step(np.r_[0.0, recall], np.r_[precision[0], precision], where="pre")
        except DegenerateInput:
            ax.text(0.5, 0.5, "no positive labels", ha="center", transform=ax.transAxes)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_confusion(pred, truth, num_classes: int, path) -> Path:
    m = np.zeros((num_classes, num_classes), dtype=int)
    for p, t in zip(pred, truth):
        m[int(t), int(p)] += 1
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.2))
        ax.imshow(m, cmap="Blues")
        for (i, j), v in np.ndenumerate(m):
            ax.text(j, i, str(v), ha="center", va="center", fontsize=7)
        ax.set_xlabel("predicted class")
        ax.set_ylabel("true class")
        return _save(fig, path)


def plot_ordinal(losses: dict[str, list[float]], path, title: str = "held-out loss by fusion mode") -> Path:
    """Per-mode held-out losses over seeds: dots per seed, bar at the median."""
    modes = list(losses)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for k, mode in enumerate(modes):
            vals = np.asarray(losses[mode], float)
            ax.bar(k, np.median(vals), color=MODE_COLORS.get(mode, "C0"), alpha=0.6, width=0.6)
            ax.scatter(np.full(len(vals), k), vals, color="k", s=8, zorder=3)
        ax.set_xticks(range(len(modes)))
        ax.set_xticklabels([m.replace("_", "\n") for m in modes])
        ax.set_ylabel("held-out MSE")
        ax.set_title(title)
        return _save(fig, path)
