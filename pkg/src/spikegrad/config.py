"""Run configuration: JSON schema, strict validation, and named presets.

A run config is a JSON object with these sections (all optional unless
noted):

    architecture   (required) architecture shorthand string
    seed           master seed; all randomness (init, shuffling, jitter)
                   derives from it through a splittable counter generator
    epochs         training epochs (0 writes the initial checkpoint only)
    batch_size     samples per optimizer step
    grid           {"dt_ms": float, "num_steps": int}
    neuron         {"theta", "tau_s", "tau_r", "surrogate_scale",
                    "surrogate_width"}
    loss           {"kind", "window", "rate_true", "rate_false", "eps",
                    "tau_s", "gradient_mode"}
    optimizer      {"kind", "lr", "momentum", "beta1", "beta2", "adam_eps"}
    dataset        {"kind": "synthetic", ...generator params} or
                   {"kind": "manifest", "train": path, "test": path,
                    "train_crop_ms": float|null}
    pool_weight_scale  pool weight in multiples of theta
    init           {"rate_low", "rate_high", "calibration_samples"}

Unknown keys anywhere are rejected, with the offending dotted key path
named. Named presets ship with the package; ``load_config`` accepts either
a file path or a preset name.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .losses import LossConfig
from .neuron import NeuronParams
from .optim import OPTIMIZER_KINDS, OptimizerState
from .tensors import TimeGrid


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value; message names the key."""


# Benchmark hyperparameter presets. Threshold 10 mV and 1 ms sampling are
# shared; the response/refractory time constants, count window and
# spike-rate targets are per dataset.
PRESET_HYPERPARAMS: dict[str, dict[str, Any]] = {
    "nmnist": {
        "architecture": "34x34x2-16c5-2a-32c3-2a-64c3-512-10",
        "theta": 10.0,
        "dt_ms": 1.0,
        "tau_s": 1.0,
        "tau_r": 1.0,
        "window": 30,
        "rate_true": 0.2,
        "rate_false": 0.04,
        "duration_ms": 300.0,
    },
    "dvs-gesture": {
        "architecture": "128x128x2-4a-16c5-2a-32c3-2a-512-11",
        "theta": 10.0,
        "dt_ms": 1.0,
        "tau_s": 5.0,
        "tau_r": 5.0,
        "window": 35,
        "rate_true": 0.35,
        "rate_false": 0.07,
        "train_crop_ms": 300.0,
        "test_duration_ms": 1500.0,
    },
    "ntidigits": {
        "architecture": "64-256-256-11",
        "theta": 10.0,
        "dt_ms": 1.0,
        "tau_s": 5.0,
        "tau_r": 5.0,
        "window": 40,
        "rate_true": 0.2,
        "rate_false": 0.02,
    },
}


@dataclass(frozen=True)
class SyntheticDataConfig:
    kind: str = "synthetic"
    classes: int = 3
    units: int = 20
    steps: int = 100
    jitter: int = 2
    deletion: float = 0.05
    density: float = 0.1
    train_per_class: int = 20
    test_per_class: int = 10


@dataclass(frozen=True)
class ManifestDataConfig:
    kind: str = "manifest"
    train: str = ""
    test: str = ""
    train_crop_ms: float | None = None


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        # reuse the optimizer's own validation
        OptimizerState(
            kind=self.kind,
            lr=self.lr,
            momentum=self.momentum,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
        )


@dataclass(frozen=True)
class InitConfig:
    rate_low: float = 0.05
    rate_high: float = 0.3
    calibration_samples: int = 8

    def __post_init__(self) -> None:
        if not 0.0 < self.rate_low < self.rate_high <= 1.0:
            raise ConfigError(
                f"init rate band ({self.rate_low}, {self.rate_high}) must satisfy "
                "0 < low < high <= 1"
            )
        if self.calibration_samples < 0:
            raise ConfigError("init.calibration_samples must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    architecture: str
    seed: int = 0
    epochs: int = 1
    batch_size: int = 10
    grid: TimeGrid = field(default_factory=TimeGrid)
    neuron: NeuronParams = field(default_factory=NeuronParams)
    loss: LossConfig = field(default_factory=lambda: LossConfig(kind="spikemax_g"))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dataset: SyntheticDataConfig | ManifestDataConfig = field(
        default_factory=SyntheticDataConfig
    )
    pool_weight_scale: float = 1.1
    init: InitConfig = field(default_factory=InitConfig)
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pool_weight_scale <= 0:
            raise ConfigError("pool_weight_scale must be positive")


def _require_keys(raw: dict, allowed: set[str], prefix: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        key = sorted(unknown)[0]
        path = f"{prefix}.{key}" if prefix else key
        raise ConfigError(f"unknown config key {path!r}")


def _build(cls, raw: dict, prefix: str, error_cls=ConfigError):
    fields = {f for f in cls.__dataclass_fields__}
    _require_keys(raw, fields, prefix)
    try:
        return cls(**raw)
    except (ValueError, TypeError) as exc:
        raise error_cls(f"invalid {prefix or cls.__name__}: {exc}") from None


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(RunConfig.__dataclass_fields__)
    _require_keys(raw, allowed, "")
    if "architecture" not in raw:
        raise ConfigError("missing required key 'architecture'")

    out: dict[str, Any] = {}
    for key in (
        "architecture",
        "seed",
        "epochs",
        "batch_size",
        "pool_weight_scale",
        "output_dir",
    ):
        if key in raw:
            out[key] = raw[key]

    if "grid" in raw:
        grid_raw = dict(raw["grid"])
        _require_keys(grid_raw, {"dt_ms", "num_steps"}, "grid")
        try:
            out["grid"] = TimeGrid(
                dt=float(grid_raw.get("dt_ms", 1.0)),
                num_steps=int(grid_raw.get("num_steps", 1)),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid grid: {exc}") from None
    if "neuron" in raw:
        out["neuron"] = _build(NeuronParams, dict(raw["neuron"]), "neuron")
    if "loss" in raw:
        out["loss"] = _build(LossConfig, dict(raw["loss"]), "loss")
    if "optimizer" in raw:
        opt_raw = dict(raw["optimizer"])
        if opt_raw.get("kind") not in OPTIMIZER_KINDS:
            raise ConfigError(
                f"invalid optimizer.kind {opt_raw.get('kind')!r}; expected one of "
                f"{OPTIMIZER_KINDS}"
            )
        out["optimizer"] = _build(OptimizerConfig, opt_raw, "optimizer")
    if "init" in raw:
        out["init"] = _build(InitConfig, dict(raw["init"]), "init")
    if "dataset" in raw:
        ds_raw = dict(raw["dataset"])
        kind = ds_raw.get("kind")
        if kind == "synthetic":
            out["dataset"] = _build(SyntheticDataConfig, ds_raw, "dataset")
        elif kind == "manifest":
            ds = _build(ManifestDataConfig, ds_raw, "dataset")
            if not ds.train or not ds.test:
                raise ConfigError("dataset.train and dataset.test paths are required")
            out["dataset"] = ds
        else:
            raise ConfigError(
                f"invalid dataset.kind {kind!r}; expected 'synthetic' or 'manifest'"
            )

    try:
        return RunConfig(**out)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    raw = {
        "architecture": cfg.architecture,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "pool_weight_scale": cfg.pool_weight_scale,
        "grid": {"dt_ms": cfg.grid.dt, "num_steps": cfg.grid.num_steps},
        "neuron": asdict(cfg.neuron),
        "loss": asdict(cfg.loss),
        "optimizer": asdict(cfg.optimizer),
        "init": asdict(cfg.init),
        "dataset": asdict(cfg.dataset),
    }
    if cfg.output_dir is not None:
        raw["output_dir"] = cfg.output_dir
    return raw


def preset_names() -> list[str]:
    root = resources.files("spikegrad.presets")
    return sorted(
        p.name.removesuffix(".json") for p in root.iterdir() if p.name.endswith(".json")
    )


def load_preset(name: str) -> RunConfig:
    root = resources.files("spikegrad.presets")
    resource = root / f"{name}.json"
    if not resource.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return config_from_dict(json.loads(resource.read_text(encoding="utf-8")))


def load_config(path_or_preset: str) -> RunConfig:
    """Load a config file, falling back to a packaged preset name."""
    path = Path(path_or_preset)
    if path.is_file():
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return config_from_dict(raw)
    if path.suffix == ".json" or "/" in path_or_preset:
        raise ConfigError(f"config file not found: {path_or_preset}")
    return load_preset(path_or_preset)
