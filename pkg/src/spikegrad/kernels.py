"""Post-synaptic response and refractory kernels plus the causal temporal
convolution and its adjoint correlation.

The response kernel eps(t) = (t/tau_s) * exp(1 - t/tau_s) for t >= 0 shapes
the potential induced by one input spike; it rises to 1 at t = tau_s. The
refractory kernel nu(t) = -2*theta * (t/tau_r) * exp(1 - t/tau_r) is the
negative self-feedback after a neuron's own spike.

Forward dynamics use the causal convolution (kernel * x); backward credit
assignment distributes error over the same span back in time via the
correlation (kernel (.) g), the exact adjoint of the convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import DenseTensor, SpikeTensor, TimeGrid, _time_data

RESPONSE = "response"
REFRACTORY = "refractory"

# Discretization of the analytic kernels: samples are kept up to the first
# bin past the peak whose magnitude falls below `cutoff` of the peak, with a
# hard cap of 10*tau/dt + 1 samples.
DEFAULT_CUTOFF = 0.01


@dataclass(frozen=True)
class KernelVector:
    """Kernel samples at t = k*dt for k = 0..K-1."""

    samples: np.ndarray
    tau: float
    kind: str

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("kernel needs at least one sample")

    def __len__(self) -> int:
        return self.samples.size


def _alpha_samples(tau: float, dt: float, cutoff: float, scale: float) -> np.ndarray:
    if not 0 < cutoff < 1:
        raise ValueError(f"cutoff must be in (0, 1), got {cutoff}")
    cap = int(round(10.0 * tau / dt)) + 1
    t = np.arange(max(cap, 1)) * dt
    values = scale * (t / tau) * np.exp(1.0 - t / tau)
    past_peak = t > tau
    below = np.abs(values) < cutoff * abs(scale)
    cut = np.nonzero(past_peak & below)[0]
    if cut.size:
        values = values[: cut[0]]
    return values


def build_response_kernel(
    tau_s: float, grid: TimeGrid, cutoff: float = DEFAULT_CUTOFF
) -> KernelVector:
    """Discretized spike response kernel; unit peak at t = tau_s."""
    if not tau_s > 0:
        raise ValueError(f"tau_s must be positive, got {tau_s}")
    return KernelVector(_alpha_samples(tau_s, grid.dt, cutoff, 1.0), tau_s, RESPONSE)


def build_refractory_kernel(
    tau_r: float, theta: float, grid: TimeGrid, cutoff: float = DEFAULT_CUTOFF
) -> KernelVector:
    """Discretized refractory kernel; minimum -2*theta at t = tau_r."""
    if not tau_r > 0:
        raise ValueError(f"tau_r must be positive, got {tau_r}")
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    samples = _alpha_samples(tau_r, grid.dt, cutoff, -2.0 * theta)
    return KernelVector(samples, tau_r, REFRACTORY)


def temporal_convolve(kernel: KernelVector, x: SpikeTensor | np.ndarray) -> DenseTensor:
    """Causal convolution y[t] = sum_k kernel[k] * x[t - k], per unit.

    Direct time-domain evaluation; each tap adds its shifted contribution
    in ascending k order, which keeps results bit-reproducible against a
    naive scalar evaluation of the same sum.
    """
    data = _time_data(x)
    num_steps = data.shape[-1]
    out = np.zeros_like(data, dtype=np.float64)
    for k, w in enumerate(kernel.samples[:num_steps]):
        if w != 0.0:
            out[..., k:] += w * data[..., : num_steps - k]
    return out


def temporal_correlate(kernel: KernelVector, g: SpikeTensor | np.ndarray) -> DenseTensor:
    """Anti-causal correlation r[t] = sum_k kernel[k] * g[t + k], per unit.

    This is the adjoint of :func:`temporal_convolve`:
    <kernel * x, g> == <x, kernel (.) g> for all x, g.
    """
    data = _time_data(g)
    num_steps = data.shape[-1]
    out = np.zeros_like(data, dtype=np.float64)
    for k, w in enumerate(kernel.samples[:num_steps]):
        if w != 0.0:
            out[..., : num_steps - k] += w * data[..., k:]
    return out
