"""Checkpoint file format.

Layout: 8-byte magic ``SPKM0001``, a 4-byte little-endian header length, a
UTF-8 JSON header, then one raw little-endian float32 blob per trainable
layer in declared order. The header records the architecture string, neuron
parameters, loss configuration, epoch, seed, metric history and the
expected blob shapes, so a load can validate sizes before touching weights.

Weights are stored as float32; the trainer keeps live weights on the
float32 grid after every update, which makes save -> load lossless.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import network
from .tensors import DenseTensor

MAGIC = b"SPKM0001"


@dataclass
class Checkpoint:
    architecture: str
    weights: list[DenseTensor | None]
    neuron: dict[str, Any]
    loss: dict[str, Any]
    epoch: int = 0
    seed: int = 0
    metrics: list[dict[str, Any]] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    net = network.parse_architecture(ckpt.architecture)
    layers = []
    blobs = []
    for i, w in enumerate(ckpt.weights):
        expected = network.weight_shape(net, i)
        if (w is None) != (expected is None):
            raise ValueError(f"layer {i} weight presence does not match architecture")
        if w is None:
            continue
        w = np.asarray(w)
        if w.shape != expected:
            raise ValueError(
                f"layer {i} weights have shape {w.shape}, architecture expects "
                f"{expected}"
            )
        layers.append({"index": i, "shape": list(w.shape)})
        blobs.append(np.ascontiguousarray(w, dtype="<f4").tobytes())

    header = {
        "architecture": ckpt.architecture,
        "neuron": ckpt.neuron,
        "loss": ckpt.loss,
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "metrics": ckpt.metrics,
        "layers": layers,
        "extra": ckpt.extra,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint (bad magic)")
    header_len = struct.unpack("<I", raw[len(MAGIC) : len(MAGIC) + 4])[0]
    body_start = len(MAGIC) + 4
    if len(raw) < body_start + header_len:
        raise ValueError(f"{path}: truncated header")
    try:
        header = json.loads(raw[body_start : body_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt header ({exc})") from None

    net = network.parse_architecture(header["architecture"])
    declared = {entry["index"]: tuple(entry["shape"]) for entry in header["layers"]}
    for i in range(len(net.layers)):
        expected = network.weight_shape(net, i)
        if expected is None:
            if i in declared:
                raise ValueError(
                    f"{path}: header declares weights for fixed layer {i}"
                )
        elif declared.get(i) != expected:
            raise ValueError(
                f"{path}: header layer {i} shape {declared.get(i)} does not match "
                f"architecture {header['architecture']!r} (expects {expected})"
            )

    weights: list[DenseTensor | None] = [None] * len(net.layers)
    offset = body_start + header_len
    for entry in header["layers"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape)) * 4
        blob = raw[offset : offset + nbytes]
        if len(blob) < nbytes:
            raise ValueError(
                f"{path}: truncated weight blob for layer {entry['index']} "
                f"({net.layers[entry['index']].render()})"
            )
        weights[entry["index"]] = (
            np.frombuffer(blob, dtype="<f4").reshape(shape).astype(np.float64)
        )
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after weights")

    return Checkpoint(
        architecture=header["architecture"],
        weights=weights,
        neuron=header["neuron"],
        loss=header["loss"],
        epoch=header["epoch"],
        seed=header["seed"],
        metrics=header["metrics"],
        extra=header.get("extra", {}),
    )
