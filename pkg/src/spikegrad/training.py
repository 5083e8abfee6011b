"""Mini-batch training loop with end-to-end seeding and checkpointing.

One master seed drives everything (weight init, shuffling, synthetic
jitter, crop offsets) through spawned counter-based generators, so a run is
reproducible bit for bit. Within a batch, per-sample gradients may be
computed by a pool of workers against a read-only weight snapshot; the
reduction always sums in sample-index order, which keeps results identical
for any worker count.

After every optimizer step the weights are rounded to the float32 grid
(the checkpoint storage precision), so saved and live weights are always
the same numbers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import network, optim
from .analysis import classify
from .checkpoint import Checkpoint, save_checkpoint
from .config import ManifestDataConfig, RunConfig, SyntheticDataConfig, config_to_dict
from .events import gen_synthetic, load_dataset
from .losses import LossConfig, classification_loss
from .network import NetworkSpec, network_backward, network_forward
from .neuron import NeuronParams
from .optim import OptimizerState
from .tensors import DenseTensor, SpikeTensor, TimeGrid

Dataset = list[tuple[SpikeTensor, int]]


class NaNLossError(RuntimeError):
    """Training hit a non-finite loss; message names the offending sample."""


@dataclass
class EpochMetrics:
    epoch: int
    mean_train_loss: float
    train_accuracy: float
    test_accuracy: float


def _quantize(weights: list[DenseTensor | None]) -> list[DenseTensor | None]:
    # keep live weights exactly representable in the checkpoint's float32
    return [
        None if w is None else w.astype(np.float32).astype(np.float64)
        for w in weights
    ]


def _sample_pass(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    params: NeuronParams,
    loss_cfg: LossConfig,
    sample: SpikeTensor,
    label: int,
) -> tuple[float, list[DenseTensor | None], bool]:
    acts = network_forward(net, weights, sample, params)
    output = acts[-1].spikes
    result = classification_loss(output, label, loss_cfg)
    grads = network_backward(net, weights, acts, result.grad_spikes, params)
    return result.value, grads, classify(output) == label


def train_epoch(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    dataset: Dataset,
    loss_cfg: LossConfig,
    opt_state: OptimizerState,
    batch_size: int,
    rng: np.random.Generator,
    params: NeuronParams,
    workers: int = 1,
) -> tuple[list[DenseTensor | None], float, float]:
    """One pass over the dataset; returns (weights, mean loss, accuracy).

    Shuffles with the given generator, sums per-sample gradients in sample
    order, and applies one optimizer step per batch. A non-finite loss
    aborts immediately.
    """
    order = rng.permutation(len(dataset))
    total_loss = 0.0
    correct = 0
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            jobs = [
                (net, weights, params, loss_cfg, dataset[i][0], dataset[i][1])
                for i in batch
            ]
            if pool is not None:
                results = list(pool.map(lambda args: _sample_pass(*args), jobs))
            else:
                results = [_sample_pass(*args) for args in jobs]

            grad_total: list[DenseTensor | None] = [
                None if w is None else np.zeros_like(w) for w in weights
            ]
            for sample_index, (value, grads, hit) in zip(batch, results):
                if not math.isfinite(value):
                    raise NaNLossError(
                        f"non-finite loss at dataset sample {sample_index} "
                        f"(label {dataset[sample_index][1]})"
                    )
                for i, g in enumerate(grads):
                    if g is not None:
                        grad_total[i] += g
                total_loss += value
                correct += int(hit)
            weights = _quantize(optim.apply_step(opt_state, weights, grad_total))
    finally:
        if pool is not None:
            pool.shutdown()
    n = len(dataset)
    return weights, total_loss / n, correct / n


def evaluate(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    dataset: Dataset,
    params: NeuronParams,
) -> tuple[float, list[int]]:
    """Whole-record classification accuracy and per-sample predictions."""
    if not dataset:
        raise ValueError("dataset is empty")
    predictions = []
    correct = 0
    for sample, label in dataset:
        acts = network_forward(net, weights, sample, params)
        pred = classify(acts[-1].spikes)
        predictions.append(pred)
        correct += int(pred == label)
    return correct / len(dataset), predictions


def write_metrics_csv(rows: list[EpochMetrics], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_train_loss", "train_accuracy", "test_accuracy"])
        for row in rows:
            writer.writerow(
                [row.epoch, repr(row.mean_train_loss), repr(row.train_accuracy),
                 repr(row.test_accuracy)]
            )


class Trainer:
    """Owns one training run: data, weights, optimizer, metrics, outputs.

    ``base_dir`` anchors relative manifest paths (defaults to the config
    file's directory when loaded through the CLI).
    """

    def __init__(
        self,
        cfg: RunConfig,
        out_dir: str | Path,
        workers: int = 1,
        base_dir: str | Path = ".",
    ):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.workers = max(1, int(workers))
        self.base_dir = Path(base_dir)

        self.net = network.parse_architecture(
            cfg.architecture, pool_weight_scale=cfg.pool_weight_scale
        )
        self.params = cfg.neuron
        self.grid = cfg.grid

        root = np.random.SeedSequence(cfg.seed)
        init_seq, shuffle_seq, crop_seq = root.spawn(3)
        self.shuffle_rng = np.random.Generator(np.random.Philox(shuffle_seq))
        self.crop_rng = np.random.Generator(np.random.Philox(crop_seq))

        self.train_data, self.test_data = self._load_data()
        if not self.train_data:
            raise ValueError("training dataset is empty")

        calibration = [
            s for s, _ in self.train_data[: cfg.init.calibration_samples]
        ]
        init_rng = np.random.Generator(np.random.Philox(init_seq))
        self.weights = _quantize(
            network.init_weights(
                self.net,
                self.params,
                init_rng,
                calibration=calibration or None,
                rate_band=(cfg.init.rate_low, cfg.init.rate_high),
            )
        )
        self.opt_state = optim.init_optimizer(
            cfg.optimizer.kind,
            self.weights,
            lr=cfg.optimizer.lr,
            momentum=cfg.optimizer.momentum,
            beta1=cfg.optimizer.beta1,
            beta2=cfg.optimizer.beta2,
            adam_eps=cfg.optimizer.adam_eps,
        )
        self.history: list[EpochMetrics] = []

    def _load_data(self) -> tuple[Dataset, Dataset]:
        ds = self.cfg.dataset
        if isinstance(ds, SyntheticDataConfig):
            if ds.steps != self.grid.num_steps or self.grid.dt != 1.0:
                # the generator owns its grid; keep the run grid in sync
                ds = SyntheticDataConfig(**{**asdict(ds), "steps": self.grid.num_steps})
            data = gen_synthetic(
                classes=ds.classes,
                units=ds.units,
                steps=self.grid.num_steps,
                jitter=ds.jitter,
                seed=self.cfg.seed,
                train_per_class=ds.train_per_class,
                test_per_class=ds.test_per_class,
                density=ds.density,
                deletion=ds.deletion,
                dt=self.grid.dt,
            )
            return list(data.train), list(data.test)
        assert isinstance(ds, ManifestDataConfig)
        train = load_dataset(self.base_dir / ds.train, self.grid)
        test = load_dataset(self.base_dir / ds.test, self.grid)
        return train, test

    def _epoch_train_view(self) -> Dataset:
        """Training samples for this epoch (random crop when configured)."""
        ds = self.cfg.dataset
        crop_ms = getattr(ds, "train_crop_ms", None)
        if crop_ms is None:
            return self.train_data
        crop_bins = int(round(crop_ms / self.grid.dt))
        crop_bins = min(max(crop_bins, 1), self.grid.num_steps)
        if crop_bins == self.grid.num_steps:
            return self.train_data
        grid = TimeGrid(self.grid.dt, crop_bins)
        view = []
        for sample, label in self.train_data:
            offset = int(self.crop_rng.integers(0, self.grid.num_steps - crop_bins + 1))
            view.append(
                (SpikeTensor(sample.data[..., offset : offset + crop_bins], grid), label)
            )
        return view

    def checkpoint(self, epoch: int) -> Checkpoint:
        return Checkpoint(
            architecture=self.cfg.architecture,
            weights=self.weights,
            neuron=asdict(self.params),
            loss=asdict(self.cfg.loss),
            epoch=epoch,
            seed=self.cfg.seed,
            metrics=[asdict(m) for m in self.history],
            extra={
                "grid": {"dt_ms": self.grid.dt, "num_steps": self.grid.num_steps},
                "pool_weight_scale": self.cfg.pool_weight_scale,
            },
        )

    def run(self, stop_at_test_accuracy: float | None = None) -> list[EpochMetrics]:
        """Train for the configured epochs, checkpointing every epoch.

        ``stop_at_test_accuracy`` ends the run early once reached (used by
        smoke runs); the epoch that reached it is still recorded.
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.checkpoint(0), self.out_dir / "checkpoint.bin")
        for epoch in range(1, self.cfg.epochs + 1):
            train_view = self._epoch_train_view()
            self.weights, mean_loss, train_acc = train_epoch(
                self.net,
                self.weights,
                train_view,
                self.cfg.loss,
                self.opt_state,
                self.cfg.batch_size,
                self.shuffle_rng,
                self.params,
                workers=self.workers,
            )
            test_acc, _ = evaluate(self.net, self.weights, self.test_data, self.params)
            self.history.append(EpochMetrics(epoch, mean_loss, train_acc, test_acc))
            save_checkpoint(self.checkpoint(epoch), self.out_dir / "checkpoint.bin")
            write_metrics_csv(self.history, self.out_dir / "metrics.csv")
            if stop_at_test_accuracy is not None and test_acc >= stop_at_test_accuracy:
                break
        if not self.history:
            write_metrics_csv(self.history, self.out_dir / "metrics.csv")
        return self.history
