"""Evaluation instruments: accuracy versus inference time, and per-layer
spike counts as a relative energy proxy.

Classification reads the output layer as cumulative spike counts from time
zero: the predicted class at time t is the argmax of the counts accumulated
over [0, t). Ties break toward the lowest class index (zero-count prefixes
make ties common, so the rule is deterministic and documented). Because the
forward pass is causal, accuracy at a prefix length equals what a truncated
re-simulation would give, so one full forward pass per sample suffices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import NetworkSpec, network_forward
from .neuron import NeuronParams
from .tensors import DenseTensor, SpikeTensor


@dataclass(frozen=True)
class LatencyCurve:
    """Accuracy at each evaluation time (milliseconds, strictly increasing)."""

    eval_times: tuple[float, ...]
    accuracy: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.eval_times) != len(self.accuracy):
            raise ValueError("eval_times and accuracy must have equal length")
        times = np.asarray(self.eval_times)
        if times.size and not np.all(np.diff(times) > 0):
            raise ValueError("eval_times must be strictly increasing")
        if any(not 0.0 <= a <= 1.0 for a in self.accuracy):
            raise ValueError("accuracies must lie in [0, 1]")


@dataclass(frozen=True)
class SpikeCountReport:
    """Mean spikes per sample for every layer (input included for reference)."""

    layer_names: tuple[str, ...]
    mean_spikes: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.layer_names) != len(self.mean_spikes):
            raise ValueError("layer_names and mean_spikes must have equal length")
        if any(v < 0 for v in self.mean_spikes):
            raise ValueError("spike counts cannot be negative")


def _bins_for(t_ms: float, output: SpikeTensor) -> int:
    grid = output.grid
    if not 0 < t_ms <= grid.duration + 1e-9:
        raise ValueError(
            f"evaluation time {t_ms} ms outside (0, {grid.duration}] ms"
        )
    return min(int(round(t_ms / grid.dt)), grid.num_steps)


def classify_at(output: SpikeTensor, t_ms: float) -> int:
    """Argmax of cumulative output counts over [0, t_ms)."""
    bins = _bins_for(t_ms, output)
    counts = output.flat()[:, :bins].sum(axis=-1)
    return int(np.argmax(counts))


def classify(output: SpikeTensor) -> int:
    """Argmax of whole-record output counts."""
    return classify_at(output, output.grid.duration)


def latency_curve(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    dataset: list[tuple[SpikeTensor, int]],
    params: NeuronParams,
    eval_times: list[float],
) -> LatencyCurve:
    """Accuracy at each evaluation time, one forward pass per sample.

    Accuracy depends only on cumulative counts, so the curve is computed by
    re-reducing prefixes of a single simulation per sample.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    eval_times = sorted(float(t) for t in eval_times)
    correct = np.zeros(len(eval_times), dtype=np.int64)
    for sample, label in dataset:
        acts = network_forward(net, weights, sample, params)
        output = acts[-1].spikes
        cumulative = np.cumsum(output.flat(), axis=-1)
        for j, t_ms in enumerate(eval_times):
            bins = _bins_for(t_ms, output)
            counts = cumulative[:, bins - 1] if bins > 0 else np.zeros(len(cumulative))
            if int(np.argmax(counts)) == label:
                correct[j] += 1
    accuracy = tuple(float(c) / len(dataset) for c in correct)
    return LatencyCurve(tuple(eval_times), accuracy)


def spike_report(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    dataset: list[tuple[SpikeTensor, int]],
    params: NeuronParams,
) -> SpikeCountReport:
    """Mean total spikes per layer over the dataset."""
    if not dataset:
        raise ValueError("dataset is empty")
    names = net.layer_names()
    totals = np.zeros(len(names))
    for sample, _ in dataset:
        totals[0] += float(sample.data.sum())
        acts = network_forward(net, weights, sample, params)
        for i, act in enumerate(acts, start=1):
            totals[i] += float(act.spikes.data.sum())
    means = tuple(float(t) / len(dataset) for t in totals)
    labeled = tuple(
        f"{i}:{name}" if i > 0 else f"0:input({name})"
        for i, name in enumerate(names)
    )
    return SpikeCountReport(labeled, means)


def write_latency_csv(curve: LatencyCurve, path: str | Path) -> None:
    lines = ["t_ms,accuracy"]
    lines += [f"{t!r},{a!r}" for t, a in zip(curve.eval_times, curve.accuracy)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_spike_csv(report: SpikeCountReport, path: str | Path) -> None:
    lines = ["layer,mean_spikes"]
    lines += [f"{n},{v!r}" for n, v in zip(report.layer_names, report.mean_spikes)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
