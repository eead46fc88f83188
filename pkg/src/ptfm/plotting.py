"""Figures for evaluation reports (ROC curves, predicted-vs-observed).

Figures are built on ``matplotlib.figure.Figure`` with the Agg canvas so
nothing touches pyplot's global state or needs a display.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

FIG_WIDTH = 6.0
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _new_figure(width=FIG_WIDTH, height=None):
    fig = Figure(figsize=(width, height or width * GOLDEN), facecolor="w")
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig, path, dpi=120):
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)


def roc_figure(curve, auc_value, title, path):
    fig, ax = _new_figure(height=FIG_WIDTH * 0.85)
    ax.plot([0, 1], [0, 1], "--", color="tab:blue", lw=1, label="chance")
    ax.plot(curve.fallout, curve.recall, "-", color="tab:orange", lw=2, label=f"AUC = {auc_value:.4f}")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("False positive rate (fallout)")
    ax.set_ylabel("True positive rate (recall)")
    ax.set_title(title)
    ax.legend(loc="lower right")
    _save(fig, path)
    return path


def parity_figure(predicted, actual, title, path, rmse_value=None):
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    fig, ax = _new_figure(height=FIG_WIDTH)
    ax.scatter(actual, predicted, s=6, alpha=0.4, color="k", edgecolors="none")
    lo = float(min(actual.min(), predicted.min()))
    hi = float(max(actual.max(), predicted.max()))
    ax.plot([lo, hi], [lo, hi], "-", color="red", lw=1)
    ax.set_xlabel("Observed (mins)")
    ax.set_ylabel("Predicted (mins)")
    if rmse_value is not None:
        title = f"{title}  (RMSE {rmse_value:.2f} mins)"
    ax.set_title(title)
    _save(fig, path)
    return path


def loss_figure(histories, path, title="Training loss"):
    """``histories`` maps a label to a per-epoch loss array."""
    fig, ax = _new_figure()
    for label, h in histories.items():
        ax.semilogy(np.arange(1, len(h) + 1), h, lw=1, label=label)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Mean loss")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)
    return path
