"""Dense tensors on a shared discrete time grid.

Spike data is stored densely, one real value per (unit, time bin), with the
time axis innermost so temporal convolutions stream contiguously. Forward
passes of the spike function produce {0, 1} values; real values are allowed
so gradients and relaxed (smoothed) models flow through the same operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Weights, membranes and gradients are plain float64 arrays. Where a time
# axis is present it is always the last axis.
DenseTensor = np.ndarray


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of the simulation interval.

    ``dt`` is the bin width in milliseconds, ``num_steps`` the number of
    bins; the simulated duration is ``dt * num_steps``.
    """

    dt: float = 1.0
    num_steps: int = 1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")

    @property
    def duration(self) -> float:
        """Total simulated time in milliseconds."""
        return self.dt * self.num_steps

    def times(self) -> np.ndarray:
        """Bin start times in milliseconds."""
        return np.arange(self.num_steps) * self.dt


@dataclass(frozen=True)
class SpikeTensor:
    """Spike data with unit/channel axes first and time last.

    The time axis length always equals ``grid.num_steps``.
    """

    data: np.ndarray
    grid: TimeGrid

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim < 1:
            raise ValueError("spike data needs at least a time axis")
        if data.shape[-1] != self.grid.num_steps:
            raise ValueError(
                f"time axis has {data.shape[-1]} bins, grid expects "
                f"{self.grid.num_steps}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        """Unit dimensions (time axis excluded)."""
        return self.data.shape[:-1]

    @property
    def num_units(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def flat(self) -> np.ndarray:
        """View with unit axes collapsed: shape (num_units, num_steps)."""
        return self.data.reshape(self.num_units, self.grid.num_steps)


def zeros(shape: tuple[int, ...], grid: TimeGrid) -> SpikeTensor:
    """All-zero spike tensor with the given unit shape."""
    shape = tuple(int(s) for s in shape)
    if not shape:
        raise ValueError("shape must be nonempty")
    if any(s <= 0 for s in shape):
        raise ValueError(f"shape has a nonpositive dimension: {shape}")
    return SpikeTensor(np.zeros(shape + (grid.num_steps,)), grid)


def elementwise_axpy(a: float, x: DenseTensor, y: DenseTensor) -> DenseTensor:
    """Return ``a * x + y`` elementwise."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return a * x + y


def _time_data(x: SpikeTensor | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, SpikeTensor) else np.asarray(x, dtype=np.float64)


def reduce_time_sum(
    x: SpikeTensor | np.ndarray, t_start: int = 0, t_end: int | None = None
) -> DenseTensor:
    """Per-unit sum over bins in [t_start, t_end).

    Results are in count units (no dt factor); callers apply dt where
    physical units matter.
    """
    data = _time_data(x)
    num_steps = data.shape[-1]
    if t_end is None:
        t_end = num_steps
    if not (0 <= t_start <= t_end <= num_steps):
        raise ValueError(
            f"invalid time range [{t_start}, {t_end}) for {num_steps} bins"
        )
    return data[..., t_start:t_end].sum(axis=-1)
