"""Event-file ingestion, rasterization to spike tensors, and synthetic
pattern-classification data.

Two on-disk event formats are supported:

  * N-MNIST binary: 5 bytes per event, big-endian. byte 0 = x, byte 1 = y,
    bit 7 of byte 2 = polarity, and the remaining 23 bits (bits 6..0 of
    byte 2 followed by bytes 3 and 4) = timestamp in microseconds.
  * Event CSV: UTF-8 text with header ``t_us,x,y,p`` and one event per
    line. Timestamps need not be monotonic. One-dimensional (audio-style)
    data maps onto the same format with y = 0 and x = channel.

Datasets are described by a JSON manifest listing {path, label} pairs plus
sensor metadata; see :func:`load_manifest`.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensors import SpikeTensor, TimeGrid

NMNIST_SENSOR = (34, 34)
_T_MAX = 1 << 23


@dataclass(frozen=True)
class EventRecord:
    """One sensor event. ``y`` is 0 for 1-D (audio-style) data."""

    t_us: int
    x: int
    y: int
    polarity: int


def read_nmnist_bin(data: bytes) -> list[EventRecord]:
    """Decode N-MNIST binary event bytes.

    Rejects truncated input (length not a multiple of 5) and events whose
    coordinates fall outside the 34 x 34 sensor.
    """
    if len(data) % 5 != 0:
        raise ValueError(
            f"truncated record: {len(data)} bytes is not a multiple of 5"
        )
    if not data:
        return []
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 5).astype(np.int64)
    x, y = raw[:, 0], raw[:, 1]
    polarity = raw[:, 2] >> 7
    t_us = ((raw[:, 2] & 0x7F) << 16) | (raw[:, 3] << 8) | raw[:, 4]
    bad = np.nonzero((x >= NMNIST_SENSOR[0]) | (y >= NMNIST_SENSOR[1]))[0]
    if bad.size:
        raise ValueError(
            f"event {bad[0]} has coordinates ({x[bad[0]]}, {y[bad[0]]}) outside "
            f"the {NMNIST_SENSOR[0]}x{NMNIST_SENSOR[1]} sensor"
        )
    return [
        EventRecord(int(t), int(xi), int(yi), int(p))
        for t, xi, yi, p in zip(t_us, x, y, polarity)
    ]


def write_nmnist_bin(records: list[EventRecord]) -> bytes:
    """Encode events into the N-MNIST binary layout (inverse of the reader)."""
    out = bytearray()
    for i, rec in enumerate(records):
        if not (0 <= rec.x < NMNIST_SENSOR[0] and 0 <= rec.y < NMNIST_SENSOR[1]):
            raise ValueError(f"event {i} coordinates ({rec.x}, {rec.y}) out of range")
        if rec.polarity not in (0, 1):
            raise ValueError(f"event {i} polarity must be 0 or 1, got {rec.polarity}")
        if not 0 <= rec.t_us < _T_MAX:
            raise ValueError(f"event {i} timestamp {rec.t_us} exceeds 23 bits")
        out.append(rec.x)
        out.append(rec.y)
        out.append((rec.polarity << 7) | ((rec.t_us >> 16) & 0x7F))
        out.append((rec.t_us >> 8) & 0xFF)
        out.append(rec.t_us & 0xFF)
    return bytes(out)


CSV_HEADER = "t_us,x,y,p"


def read_event_csv(text: str) -> list[EventRecord]:
    """Parse event CSV text; raises naming the offending line."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"expected header {CSV_HEADER!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            t_us, x, y, p = (int(part) for part in parts)
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field in {line!r}") from None
        records.append(EventRecord(t_us, x, y, p))
    return records


def write_event_csv(records: list[EventRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for rec in records:
        buf.write(f"{rec.t_us},{rec.x},{rec.y},{rec.polarity}\n")
    return buf.getvalue()


def rasterize(
    events: list[EventRecord],
    grid: TimeGrid,
    dims: tuple[int, ...],
    duration_cap_ms: float | None = None,
) -> SpikeTensor:
    """Bin events onto the simulation grid.

    ``dims`` is (channels, height, width) for 2-D sensors, or a single
    (units,) entry for 1-D data indexed by x. The bin index is
    floor(t_us / 1000 / dt); multiple events in one bin clamp to a single
    spike, and events at or past the duration cap are dropped.
    """
    if len(dims) == 3:
        channels, height, width = dims
        data = np.zeros((channels, height, width, grid.num_steps))
    elif len(dims) == 1:
        data = np.zeros((dims[0], grid.num_steps))
    else:
        raise ValueError(f"dims must have 1 or 3 entries, got {dims}")

    for i, rec in enumerate(events):
        t_ms = rec.t_us / 1000.0
        if duration_cap_ms is not None and t_ms >= duration_cap_ms:
            continue
        t_bin = int(math.floor(t_ms / grid.dt))
        if t_bin >= grid.num_steps:
            continue
        if len(dims) == 3:
            if not (
                0 <= rec.polarity < channels
                and 0 <= rec.y < height
                and 0 <= rec.x < width
            ):
                raise ValueError(
                    f"event {i} at ({rec.x}, {rec.y}, p={rec.polarity}) outside "
                    f"sensor dims {dims}"
                )
            data[rec.polarity, rec.y, rec.x, t_bin] = 1.0
        else:
            if not 0 <= rec.x < dims[0]:
                raise ValueError(f"event {i} channel {rec.x} outside {dims[0]} units")
            data[rec.x, t_bin] = 1.0
    return SpikeTensor(data, grid)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int


@dataclass(frozen=True)
class DatasetManifest:
    """Sample listing plus the sensor metadata needed to rasterize."""

    samples: tuple[ManifestEntry, ...]
    width: int
    height: int
    channels: int
    num_classes: int
    duration_ms: float
    format: str  # "csv" | "nmnist"

    def __post_init__(self) -> None:
        if self.format not in ("csv", "nmnist"):
            raise ValueError(f"unknown sample format {self.format!r}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        for entry in self.samples:
            if not 0 <= entry.label < self.num_classes:
                raise ValueError(
                    f"label {entry.label} out of range for {self.num_classes} classes"
                    f" ({entry.path})"
                )

    @property
    def dims(self) -> tuple[int, ...]:
        if self.height == 1 and self.channels == 1:
            return (self.width,)
        return (self.channels, self.height, self.width)


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        samples = tuple(
            ManifestEntry(str(s["path"]), int(s["label"])) for s in raw["samples"]
        )
        manifest = DatasetManifest(
            samples=samples,
            width=int(raw["width"]),
            height=int(raw["height"]),
            channels=int(raw["channels"]),
            num_classes=int(raw["num_classes"]),
            duration_ms=float(raw["duration_ms"]),
            format=str(raw["format"]),
        )
    except KeyError as missing:
        raise ValueError(f"manifest {path} is missing key {missing}") from None
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    payload = {
        "samples": [{"path": e.path, "label": e.label} for e in manifest.samples],
        "width": manifest.width,
        "height": manifest.height,
        "channels": manifest.channels,
        "num_classes": manifest.num_classes,
        "duration_ms": manifest.duration_ms,
        "format": manifest.format,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_sample(
    manifest: DatasetManifest, entry: ManifestEntry, grid: TimeGrid, base: Path
) -> SpikeTensor:
    sample_path = base / entry.path
    if manifest.format == "nmnist":
        records = read_nmnist_bin(sample_path.read_bytes())
    else:
        records = read_event_csv(sample_path.read_text(encoding="utf-8"))
    return rasterize(records, grid, manifest.dims, manifest.duration_ms)


def load_dataset(
    manifest_path: str | Path, grid: TimeGrid
) -> list[tuple[SpikeTensor, int]]:
    """Rasterize every manifest sample eagerly (paths relative to the manifest)."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    if not manifest.samples:
        raise ValueError(f"manifest {manifest_path} lists no samples")
    base = manifest_path.parent
    return [
        (load_sample(manifest, entry, grid, base), entry.label)
        for entry in manifest.samples
    ]


@dataclass(frozen=True)
class SyntheticDataset:
    """Deterministic jittered-template classification task."""

    train: tuple[tuple[SpikeTensor, int], ...]
    test: tuple[tuple[SpikeTensor, int], ...]
    templates: np.ndarray  # (classes, units, steps) binary
    classes: int
    units: int
    grid: TimeGrid


def gen_synthetic(
    classes: int,
    units: int,
    steps: int,
    jitter: int,
    seed: int,
    train_per_class: int = 20,
    test_per_class: int = 10,
    density: float = 0.1,
    deletion: float = 0.05,
    dt: float = 1.0,
) -> SyntheticDataset:
    """Generate a spike-pattern classification dataset.

    Each class is a fixed random spike template over ``units`` x ``steps``
    (templates of distinct classes are redrawn on collision). Samples copy
    the class template, delete each spike with probability ``deletion`` and
    shift survivors by a uniform integer jitter in [-jitter, jitter]
    (clipped to the record). Everything is driven by one seed and is
    bit-reproducible.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if units < classes:
        raise ValueError(f"need units >= classes, got {units} < {classes}")
    if not 0.0 < density < 1.0:
        raise ValueError(f"density must be in (0, 1), got {density}")
    if not 0.0 <= deletion < 1.0:
        raise ValueError(f"deletion must be in [0, 1), got {deletion}")
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")

    grid = TimeGrid(dt=dt, num_steps=steps)
    root = np.random.SeedSequence(seed)
    template_seq, sample_seq = root.spawn(2)
    template_rng = np.random.Generator(np.random.Philox(template_seq))

    templates = np.zeros((classes, units, steps))
    for c in range(classes):
        for _ in range(1000):
            candidate = (template_rng.random((units, steps)) < density).astype(float)
            if candidate.sum() == 0:
                continue
            if not any(np.array_equal(candidate, templates[p]) for p in range(c)):
                templates[c] = candidate
                break
        else:
            raise RuntimeError("could not draw distinct class templates")

    sample_seqs = sample_seq.spawn(classes * (train_per_class + test_per_class))
    per_class = train_per_class + test_per_class

    def make_sample(c: int, index: int) -> tuple[SpikeTensor, int]:
        rng = np.random.Generator(np.random.Philox(sample_seqs[c * per_class + index]))
        data = np.zeros((units, steps))
        unit_idx, time_idx = np.nonzero(templates[c])
        keep = rng.random(unit_idx.size) >= deletion
        shifts = rng.integers(-jitter, jitter + 1, size=unit_idx.size)
        for u, t, k, dt_bins in zip(unit_idx, time_idx, keep, shifts):
            if not k:
                continue
            t_new = min(max(int(t) + int(dt_bins), 0), steps - 1)
            data[u, t_new] = 1.0
        return SpikeTensor(data, grid), c

    train = tuple(
        make_sample(c, i) for c in range(classes) for i in range(train_per_class)
    )
    test = tuple(
        make_sample(c, train_per_class + i)
        for c in range(classes)
        for i in range(test_per_class)
    )
    return SyntheticDataset(train, test, templates, classes, units, grid)


def tensor_to_events(sample: SpikeTensor) -> list[EventRecord]:
    """Flatten a 1-D spike tensor into CSV-style events (x = unit, y = 0)."""
    if len(sample.shape) != 1:
        raise ValueError("only 1-D unit layouts map onto flat event lists")
    unit_idx, time_idx = np.nonzero(sample.data)
    dt_us = sample.grid.dt * 1000.0
    return [
        EventRecord(int(round(t * dt_us)), int(u), 0, 0)
        for u, t in zip(unit_idx, time_idx)
    ]


def write_synthetic_files(dataset: SyntheticDataset, out_dir: str | Path) -> tuple[Path, Path]:
    """Write train/test event CSVs plus manifests; returns the manifest paths."""
    out_dir = Path(out_dir)
    manifests = []
    for split_name, split in (("train", dataset.train), ("test", dataset.test)):
        split_dir = out_dir / split_name
        split_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, (sample, label) in enumerate(split):
            name = f"{split_name}_{i:04d}_c{label}.csv"
            (split_dir / name).write_text(
                write_event_csv(tensor_to_events(sample)), encoding="utf-8"
            )
            entries.append(ManifestEntry(f"{split_name}/{name}", label))
        manifest = DatasetManifest(
            samples=tuple(entries),
            width=dataset.units,
            height=1,
            channels=1,
            num_classes=dataset.classes,
            duration_ms=dataset.grid.duration,
            format="csv",
        )
        manifest_path = out_dir / f"{split_name}_manifest.json"
        save_manifest(manifest, manifest_path)
        manifests.append(manifest_path)
    return manifests[0], manifests[1]
