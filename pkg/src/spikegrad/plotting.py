"""Figure rendering for the report paths.

Every analysis/report command writes a PNG next to its CSV. Rendering is
headless (Agg); figures are deliberately plain: one panel, labeled axes,
light grid.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import LatencyCurve, SpikeCountReport

_FIG_KW = {"figsize": (6.0, 4.0), "dpi": 150}


def _finish(fig, ax, path: str | Path) -> None:
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_latency_curve(curve: LatencyCurve, path: str | Path) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    ax.plot(curve.eval_times, curve.accuracy, marker="o", lw=1.5)
    ax.set_xlabel("inference time (ms)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("accuracy vs. inference time")
    _finish(fig, ax, path)


def plot_spike_report(report: SpikeCountReport, path: str | Path) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    positions = range(len(report.layer_names))
    ax.bar(positions, report.mean_spikes, color="tab:blue")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(report.layer_names, rotation=30, ha="right")
    ax.set_ylabel("mean spikes per sample")
    ax.set_title("spike count per layer")
    _finish(fig, ax, path)


def plot_training_curves(history, path: str | Path) -> None:
    """Loss and accuracy over epochs from the trainer's metric rows."""
    epochs = [m.epoch for m in history]
    fig, ax = plt.subplots(**_FIG_KW)
    ax.plot(epochs, [m.mean_train_loss for m in history], label="train loss",
            color="tab:red")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss", color="tab:red")
    twin = ax.twinx()
    twin.plot(epochs, [m.train_accuracy for m in history], label="train acc",
              color="tab:blue")
    twin.plot(epochs, [m.test_accuracy for m in history], label="test acc",
              color="tab:green")
    twin.set_ylabel("accuracy")
    twin.set_ylim(0.0, 1.05)
    twin.legend(loc="lower right")
    ax.set_title("training progress")
    _finish(fig, ax, path)
