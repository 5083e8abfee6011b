"""Spike response model neuron layer: forward simulation and the
surrogate-gradient backward pass.

Forward, per layer: the membrane potential is the weighted sum of
response-filtered input spikes plus refractory feedback from the neuron's
own past spikes,

    u(t) = W (eps * s_in)(t) + (nu * s_own)(t)

and the layer emits a spike wherever u(t) >= theta (at most one spike per
neuron per bin). Backward, the non-differentiable spike emission is
replaced by a surrogate derivative and the temporal spread of the forward
response is compensated by correlating the error with the same kernel:

    e(t)       = rho(u(t)) . dL/ds(t)
    dL/dW      = sum_t e(t) (eps * s_in)(t)^T
    dL/ds_in   = (eps (.) (W^T e))(t)

The refractory pathway carries no gradient; this is a documented
approximation (the backward chain covers the feedforward response path
only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import (
    KernelVector,
    build_refractory_kernel,
    build_response_kernel,
    temporal_convolve,
    temporal_correlate,
)
from .tensors import DenseTensor, SpikeTensor, TimeGrid


@dataclass(frozen=True)
class NeuronParams:
    """Threshold, kernel time constants and surrogate-derivative shape.

    ``surrogate_width`` defaults to theta/2 when not given; both surrogate
    constants are exposed because no single canonical choice exists.
    """

    theta: float = 10.0
    tau_s: float = 1.0
    tau_r: float = 1.0
    surrogate_scale: float = 1.0
    surrogate_width: float | None = None

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.tau_s > 0:
            raise ValueError(f"tau_s must be positive, got {self.tau_s}")
        if not self.tau_r > 0:
            raise ValueError(f"tau_r must be positive, got {self.tau_r}")
        if self.surrogate_width is None:
            object.__setattr__(self, "surrogate_width", self.theta / 2.0)
        if not self.surrogate_width > 0:
            raise ValueError(
                f"surrogate_width must be positive, got {self.surrogate_width}"
            )

    def response_kernel(self, grid: TimeGrid) -> KernelVector:
        return build_response_kernel(self.tau_s, grid)

    def refractory_kernel(self, grid: TimeGrid) -> KernelVector:
        return build_refractory_kernel(self.tau_r, self.theta, grid)


@dataclass(frozen=True)
class LayerActivation:
    """Everything the backward pass needs from one layer's forward pass.

    ``synaptic_drive`` is the response-filtered input (eps * s_in), kept for
    the weight gradient; its unit axes are the input's, flattened.
    """

    membrane: DenseTensor
    spikes: SpikeTensor
    synaptic_drive: DenseTensor


def linear_drive(weights: DenseTensor, psp: DenseTensor) -> DenseTensor:
    """Feedforward drive W @ psp, accumulated input by input.

    The explicit ascending-input accumulation (rather than a BLAS matmul)
    keeps every output element's floating-point addition order identical to
    a naive scalar evaluation, so simulations are reproducible bit for bit
    against a reference recurrence.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {weights.shape}")
    n_out, n_in = weights.shape
    if psp.shape[0] != n_in:
        raise ValueError(
            f"weight inner dimension {n_in} does not match input unit count "
            f"{psp.shape[0]}"
        )
    drive = np.zeros((n_out,) + psp.shape[1:], dtype=np.float64)
    for j in range(n_in):
        drive += weights[:, j].reshape((n_out,) + (1,) * (psp.ndim - 1)) * psp[j]
    return drive


def spike_recurrence(
    drive: DenseTensor, refractory: KernelVector, theta: float
) -> tuple[DenseTensor, np.ndarray]:
    """Time-stepped thresholding with refractory feedback.

    ``drive`` has shape (units, T). Iterates bins in order: the membrane at
    bin t includes refractory contributions from spikes strictly before t;
    a spike is emitted where membrane >= theta and its refractory kernel is
    added to the future membrane. Returns (membrane, spikes).
    """
    membrane = np.array(drive, dtype=np.float64, copy=True)
    num_steps = membrane.shape[-1]
    spikes = np.zeros_like(membrane)
    tail = refractory.samples[1:]  # nu(0) = 0, nothing lands on the spike bin
    span_max = tail.size
    for t in range(num_steps):
        fired = np.nonzero(membrane[:, t] >= theta)[0]
        if fired.size:
            spikes[fired, t] = 1.0
            span = min(span_max, num_steps - 1 - t)
            if span > 0:
                membrane[fired, t + 1 : t + 1 + span] += tail[:span]
    return membrane, spikes


def forward(
    weights: DenseTensor, input_spikes: SpikeTensor, params: NeuronParams
) -> LayerActivation:
    """Simulate a dense spiking layer.

    Deterministic: identical inputs produce bit-identical activations.
    """
    grid = input_spikes.grid
    psp = temporal_convolve(params.response_kernel(grid), input_spikes.flat())
    drive = linear_drive(weights, psp)
    membrane, spikes = spike_recurrence(
        drive, params.refractory_kernel(grid), params.theta
    )
    return LayerActivation(membrane, SpikeTensor(spikes, grid), psp)


def surrogate_derivative(membrane: DenseTensor, params: NeuronParams) -> DenseTensor:
    """Exponential surrogate for the spike-function derivative.

    rho(u) = (scale / width) * exp(-|u - theta| / width): strictly positive,
    symmetric about the threshold and maximal there.
    """
    gamma = params.surrogate_scale
    alpha = params.surrogate_width
    return (gamma / alpha) * np.exp(-np.abs(np.asarray(membrane) - params.theta) / alpha)


def backward(
    grad_spikes: DenseTensor,
    activation: LayerActivation,
    weights: DenseTensor,
    params: NeuronParams,
    spike_derivative: DenseTensor | None = None,
) -> tuple[DenseTensor, DenseTensor]:
    """Backward pass of :func:`forward`.

    ``spike_derivative`` overrides the surrogate (used by smoothed test
    models); by default it is rho(membrane). Returns
    (grad_weights, grad_input_spikes).
    """
    if spike_derivative is None:
        spike_derivative = surrogate_derivative(activation.membrane, params)
    error = np.asarray(grad_spikes, dtype=np.float64) * spike_derivative
    grad_weights = error @ activation.synaptic_drive.T
    back = np.asarray(weights, dtype=np.float64).T @ error
    kernel = params.response_kernel(activation.spikes.grid)
    grad_input = temporal_correlate(kernel, back)
    return grad_weights, grad_input


def smooth_spike(membrane: DenseTensor, params: NeuronParams) -> DenseTensor:
    """Sigmoid relaxation of the spike function, sigma((u - theta)/width)."""
    z = (np.asarray(membrane) - params.theta) / params.surrogate_width
    return 1.0 / (1.0 + np.exp(-z))

def smooth_spike_derivative(membrane: DenseTensor, params: NeuronParams) -> DenseTensor:
    s = smooth_spike(membrane, params)
    return s * (1.0 - s) / params.surrogate_width


def forward_smooth(
    weights: DenseTensor, input_spikes: SpikeTensor, params: NeuronParams
) -> LayerActivation:
    """Differentiable relaxation of :func:`forward` for gradient checks.

    The hard threshold is replaced by a sigmoid and the refractory feedback
    is dropped (the backward pass assigns it no gradient, so the relaxed
    model must omit it for finite differences to agree).
    """
    grid = input_spikes.grid
    psp = temporal_convolve(params.response_kernel(grid), input_spikes.flat())
    drive = linear_drive(weights, psp)
    spikes = smooth_spike(drive, params)
    return LayerActivation(drive, SpikeTensor(spikes, grid), psp)
