"""Command-line entry point.

Commands:

    train          --config PATH|PRESET [--out DIR] [--seed N] [--workers N]
    eval           --checkpoint FILE --manifest FILE [--out DIR]
    analyze        --checkpoint FILE --manifest FILE --mode latency|spikes
                   [--times T1,T2,...] [--out DIR]
    gen-synthetic  --out DIR [--classes N] [--units M] [--steps T]
                   [--jitter J] [--seed N] [...]

Flags override config keys (flag > file > default) and the effective
configuration is echoed into the output directory. ``--workers`` falls back
to the SPIKEGRAD_WORKERS environment variable, then the machine's core
count. Report commands write a PNG figure next to each CSV.

Exit codes: 0 success, 1 missing files or runtime failures, 2 invalid
configuration or parameters, 3 non-finite loss abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, plotting
from .checkpoint import load_checkpoint
from .config import ConfigError, RunConfig, config_to_dict, load_config
from .events import gen_synthetic, load_dataset, load_manifest, write_synthetic_files
from .network import network_forward, parse_architecture
from .neuron import NeuronParams
from .tensors import TimeGrid
from .training import NaNLossError, Trainer

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_NAN = 3


def _resolve_workers(flag_value: int | None) -> int:
    if flag_value is not None:
        return max(1, flag_value)
    env = os.environ.get("SPIKEGRAD_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(
                f"SPIKEGRAD_WORKERS must be an integer, got {env!r}"
            ) from None
    return os.cpu_count() or 1


def _checkpoint_context(path: str):
    """Net, weights, params and grid reconstructed from a checkpoint."""
    ckpt = load_checkpoint(path)
    pool_scale = ckpt.extra.get("pool_weight_scale", 1.1)
    net = parse_architecture(ckpt.architecture, pool_weight_scale=pool_scale)
    params = NeuronParams(**ckpt.neuron)
    grid_raw = ckpt.extra.get("grid")
    if grid_raw is None:
        raise ValueError(f"{path}: checkpoint lacks grid metadata")
    grid = TimeGrid(dt=float(grid_raw["dt_ms"]), num_steps=int(grid_raw["num_steps"]))
    return ckpt, net, params, grid


def cmd_train(args: argparse.Namespace) -> int:
    cfg: RunConfig = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = Path(args.out or cfg.output_dir or "spikegrad-run")
    workers = _resolve_workers(args.workers)
    base_dir = Path(args.config).parent if Path(args.config).is_file() else Path(".")

    trainer = Trainer(cfg, out_dir, workers=workers, base_dir=base_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    effective = config_to_dict(cfg)
    effective["output_dir"] = str(out_dir)
    (out_dir / "config.json").write_text(
        json.dumps(effective, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    history = trainer.run()
    if history:
        plotting.plot_training_curves(history, out_dir / "training_curves.png")
        last = history[-1]
        print(
            f"epoch {last.epoch}: train loss {last.mean_train_loss:.6f}, "
            f"train acc {last.train_accuracy:.4f}, test acc {last.test_accuracy:.4f}"
        )
    print(f"wrote {out_dir / 'checkpoint.bin'}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt, net, params, grid = _checkpoint_context(args.checkpoint)
    manifest = load_manifest(args.manifest)
    dataset = load_dataset(args.manifest, grid)
    correct = 0
    rows = ["path,label,predicted"]
    for (sample, label), entry in zip(dataset, manifest.samples):
        acts = network_forward(net, ckpt.weights, sample, params)
        pred = analysis.classify(acts[-1].spikes)
        rows.append(f"{entry.path},{label},{pred}")
        correct += int(pred == label)
    accuracy = correct / len(dataset)
    print(f"accuracy {accuracy!r} ({correct}/{len(dataset)})")
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "predictions.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    ckpt, net, params, grid = _checkpoint_context(args.checkpoint)
    dataset = load_dataset(args.manifest, grid)
    out_dir = Path(args.out or "analysis")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "latency":
        if args.times:
            times = [float(tok) for tok in args.times.split(",") if tok.strip()]
        else:
            times = list(np.linspace(grid.duration / 10.0, grid.duration, 10))
        curve = analysis.latency_curve(net, ckpt.weights, dataset, params, times)
        analysis.write_latency_csv(curve, out_dir / "latency.csv")
        plotting.plot_latency_curve(curve, out_dir / "latency.png")
        print(f"wrote {out_dir / 'latency.csv'} and {out_dir / 'latency.png'}")
    else:
        report = analysis.spike_report(net, ckpt.weights, dataset, params)
        analysis.write_spike_csv(report, out_dir / "spike_counts.csv")
        plotting.plot_spike_report(report, out_dir / "spike_counts.png")
        print(f"wrote {out_dir / 'spike_counts.csv'} and {out_dir / 'spike_counts.png'}")
    return EXIT_OK


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    try:
        dataset = gen_synthetic(
            classes=args.classes,
            units=args.units,
            steps=args.steps,
            jitter=args.jitter,
            seed=args.seed if args.seed is not None else 0,
            train_per_class=args.train_per_class,
            test_per_class=args.test_per_class,
            density=args.density,
            deletion=args.deletion,
            dt=args.dt,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    train_manifest, test_manifest = write_synthetic_files(dataset, args.out)
    print(f"wrote {train_manifest} and {test_manifest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikegrad",
        description="Train and analyze spiking networks with count-based losses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a network from a config or preset")
    train.add_argument("--config", required=True, help="config file or preset name")
    train.add_argument("--out", help="output directory")
    train.add_argument("--seed", type=int, help="override the config seed")
    train.add_argument("--workers", type=int, help="worker count")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", help="directory for predictions.csv")
    ev.set_defaults(func=cmd_eval)

    an = sub.add_parser("analyze", help="latency or spike-count analysis")
    an.add_argument("--checkpoint", required=True)
    an.add_argument("--manifest", required=True)
    an.add_argument("--mode", required=True, choices=("latency", "spikes"))
    an.add_argument("--times", help="comma-separated evaluation times (ms)")
    an.add_argument("--out", help="output directory")
    an.set_defaults(func=cmd_analyze)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic event dataset")
    gen.add_argument("--out", required=True)
    gen.add_argument("--classes", type=int, default=3)
    gen.add_argument("--units", type=int, default=20)
    gen.add_argument("--steps", type=int, default=100)
    gen.add_argument("--jitter", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--train-per-class", type=int, default=20)
    gen.add_argument("--test-per-class", type=int, default=10)
    gen.add_argument("--density", type=float, default=0.1)
    gen.add_argument("--deletion", type=float, default=0.05)
    gen.add_argument("--dt", type=float, default=1.0)
    gen.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NaNLossError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_NAN
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
