"""Layer composition and the architecture shorthand.

Networks are described by a compact string: tokens separated by ``-``.
``HxWxC`` declares the input sensor shape, ``KcN`` a convolution with K
channels and an N x N kernel (odd N, shape-preserving zero padding, stride
1), ``Na`` an N x N aggregate pooling stage, and a bare integer a dense
layer of that many neurons. Example: ``34x34x2-16c5-2a-32c3-2a-64c3-512-10``.

Aggregate pooling is a fixed-weight (non-trainable) N x N spatial sum
feeding a spiking neuron; the pool weight is ``pool_weight_scale * theta``
(default scale 1.1) so a single pooled input spike drives the pool neuron
over threshold at the response peak. When a pool does not divide the
incoming spatial dims exactly, the trailing rows/columns are dropped (floor
division), which admits odd intermediate sizes such as 17.

Convolution and dense layers are spiking layers with hand-coded gradients;
pooling passes gradient equally (scaled by the pool weight) to all pooled
inputs. There are no bias terms.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import neuron
from .kernels import KernelVector, temporal_convolve, temporal_correlate
from .neuron import LayerActivation, NeuronParams
from .tensors import DenseTensor, SpikeTensor

_INPUT_RE = re.compile(r"^(\d+)x(\d+)x(\d+)$")
_CONV_RE = re.compile(r"^(\d+)c(\d+)$")
_POOL_RE = re.compile(r"^(\d+)a$")
_DENSE_RE = re.compile(r"^(\d+)$")

DEFAULT_POOL_WEIGHT_SCALE = 1.1


@dataclass(frozen=True)
class LayerSpec:
    """One token of the architecture string."""

    kind: str  # "input" | "dense" | "conv" | "pool"
    units: int = 0  # dense width
    channels: int = 0  # conv output channels
    kernel: int = 0  # conv kernel size
    pool: int = 0  # pool window
    input_shape: tuple[int, int, int] | None = None  # (c, h, w)
    spatial_input: bool = False

    def render(self) -> str:
        if self.kind == "input":
            c, h, w = self.input_shape
            return f"{h}x{w}x{c}" if self.spatial_input else str(c * h * w)
        if self.kind == "dense":
            return str(self.units)
        if self.kind == "conv":
            return f"{self.channels}c{self.kernel}"
        return f"{self.pool}a"


@dataclass(frozen=True)
class NetworkSpec:
    """Parsed architecture plus the per-layer output shapes (c, h, w)."""

    layers: tuple[LayerSpec, ...]
    shapes: tuple[tuple[int, int, int], ...]
    pool_weight_scale: float = DEFAULT_POOL_WEIGHT_SCALE

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.shapes[0]

    @property
    def num_outputs(self) -> int:
        c, h, w = self.shapes[-1]
        return c * h * w

    def layer_names(self) -> list[str]:
        return [spec.render() for spec in self.layers]


def _parse_token(token: str, first: bool) -> LayerSpec:
    if first:
        m = _INPUT_RE.match(token)
        if m:
            h, w, c = (int(g) for g in m.groups())
            if min(h, w, c) < 1:
                raise ValueError(f"input dimensions must be positive: {token!r}")
            return LayerSpec("input", input_shape=(c, h, w), spatial_input=True)
        if _DENSE_RE.match(token):
            n = int(token)
            if n < 1:
                raise ValueError(f"input size must be positive: {token!r}")
            return LayerSpec("input", input_shape=(n, 1, 1), spatial_input=False)
        raise ValueError(f"malformed input token {token!r}")
    m = _CONV_RE.match(token)
    if m:
        channels, kernel = int(m.group(1)), int(m.group(2))
        if channels < 1:
            raise ValueError(f"conv channels must be >= 1 in {token!r}")
        if kernel < 1 or kernel % 2 == 0:
            raise ValueError(f"conv kernel must be odd and >= 1 in {token!r}")
        return LayerSpec("conv", channels=channels, kernel=kernel)
    m = _POOL_RE.match(token)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ValueError(f"pool size must be >= 1 in {token!r}")
        return LayerSpec("pool", pool=n)
    if _DENSE_RE.match(token):
        n = int(token)
        if n < 1:
            raise ValueError(f"dense width must be >= 1 in {token!r}")
        return LayerSpec("dense", units=n)
    raise ValueError(f"malformed layer token {token!r}")


def parse_architecture(
    text: str, pool_weight_scale: float = DEFAULT_POOL_WEIGHT_SCALE
) -> NetworkSpec:
    """Parse an architecture string into layer specs with resolved shapes."""
    text = text.strip()
    if not text:
        raise ValueError("empty architecture string")
    tokens = text.split("-")
    layers = [_parse_token(tok, i == 0) for i, tok in enumerate(tokens)]
    if len(layers) < 2:
        raise ValueError("architecture needs at least one layer after the input")

    shapes: list[tuple[int, int, int]] = [layers[0].input_shape]
    for spec in layers[1:]:
        c, h, w = shapes[-1]
        if spec.kind == "dense":
            shapes.append((spec.units, 1, 1))
        elif spec.kind == "conv":
            if h < spec.kernel // 2 + 1 or w < spec.kernel // 2 + 1:
                raise ValueError(
                    f"conv {spec.render()} kernel too large for {h}x{w} input"
                )
            shapes.append((spec.channels, h, w))
        else:  # pool
            h2, w2 = h // spec.pool, w // spec.pool
            if h2 < 1 or w2 < 1:
                raise ValueError(
                    f"pool {spec.render()} collapses {h}x{w} input to nothing"
                )
            shapes.append((c, h2, w2))
    return NetworkSpec(tuple(layers), tuple(shapes), pool_weight_scale)


def render(net: NetworkSpec) -> str:
    """Inverse of :func:`parse_architecture`."""
    return "-".join(net.layer_names())


def layer_parameter_counts(net: NetworkSpec) -> list[int]:
    """Trainable weight count per layer (0 for input/pool)."""
    counts = []
    for i, spec in enumerate(net.layers):
        if spec.kind == "conv":
            c_in = net.shapes[i - 1][0]
            counts.append(spec.channels * c_in * spec.kernel * spec.kernel)
        elif spec.kind == "dense":
            c, h, w = net.shapes[i - 1]
            counts.append(spec.units * c * h * w)
        else:
            counts.append(0)
    return counts


def count_parameters(net: NetworkSpec) -> int:
    """Total trainable weights (pooling is fixed-weight and contributes 0)."""
    return sum(layer_parameter_counts(net))


def weight_shape(net: NetworkSpec, index: int) -> tuple[int, ...] | None:
    """Weight array shape for layer ``index`` (None for input/pool)."""
    spec = net.layers[index]
    if spec.kind == "conv":
        c_in = net.shapes[index - 1][0]
        return (spec.channels, c_in, spec.kernel, spec.kernel)
    if spec.kind == "dense":
        c, h, w = net.shapes[index - 1]
        return (spec.units, c * h * w)
    return None


def _conv_drive(kernel_weights: np.ndarray, psp: np.ndarray) -> np.ndarray:
    """Shape-preserving 2-D convolution applied at every time bin.

    Accumulates taps in a fixed ascending (c_in, dy, dx) order so results
    are bit-reproducible against a naive scalar loop with the same nesting.
    """
    c_out, c_in, k, _ = kernel_weights.shape
    _, h, w, num_steps = psp.shape
    pad = k // 2
    padded = np.zeros((c_in, h + 2 * pad, w + 2 * pad, num_steps))
    padded[:, pad : pad + h, pad : pad + w] = psp
    drive = np.zeros((c_out, h, w, num_steps))
    for ci in range(c_in):
        for dy in range(k):
            for dx in range(k):
                taps = kernel_weights[:, ci, dy, dx]
                patch = padded[ci, dy : dy + h, dx : dx + w]
                drive += taps[:, None, None, None] * patch[None, :, :, :]
    return drive


def _conv_backward(
    kernel_weights: np.ndarray, psp: np.ndarray, error: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the convolution: (grad_kernel, grad_psp)."""
    c_out, c_in, k, _ = kernel_weights.shape
    _, h, w, num_steps = psp.shape
    pad = k // 2
    padded = np.zeros((c_in, h + 2 * pad, w + 2 * pad, num_steps))
    padded[:, pad : pad + h, pad : pad + w] = psp
    grad_kernel = np.zeros_like(kernel_weights)
    grad_padded = np.zeros_like(padded)
    for dy in range(k):
        for dx in range(k):
            patch = padded[:, dy : dy + h, dx : dx + w]
            grad_kernel[:, :, dy, dx] = np.tensordot(
                error, patch, axes=([1, 2, 3], [1, 2, 3])
            )
            grad_padded[:, dy : dy + h, dx : dx + w] += np.tensordot(
                kernel_weights[:, :, dy, dx], error, axes=(0, 0)
            )
    return grad_kernel, grad_padded[:, pad : pad + h, pad : pad + w]


def _pool_drive(psp: np.ndarray, n: int, pool_weight: float) -> np.ndarray:
    c, h, w, num_steps = psp.shape
    h2, w2 = h // n, w // n
    view = psp[:, : h2 * n, : w2 * n].reshape(c, h2, n, w2, n, num_steps)
    return pool_weight * view.sum(axis=(2, 4))


def _pool_backward(
    psp_shape: tuple[int, ...], error: np.ndarray, n: int, pool_weight: float
) -> np.ndarray:
    c, h, w, num_steps = psp_shape
    h2, w2 = h // n, w // n
    grad = np.zeros(psp_shape)
    up = np.repeat(np.repeat(error * pool_weight, n, axis=1), n, axis=2)
    grad[:, : h2 * n, : w2 * n] = up
    return grad


class _Runner:
    """Kernels and derived constants shared across one network pass."""

    def __init__(self, net: NetworkSpec, params: NeuronParams, grid):
        self.net = net
        self.params = params
        self.grid = grid
        self.response: KernelVector = params.response_kernel(grid)
        self.refractory: KernelVector = params.refractory_kernel(grid)
        self.pool_weight = net.pool_weight_scale * params.theta

    def layer_forward(
        self,
        index: int,
        weights: DenseTensor | None,
        current: np.ndarray,
        smooth: bool,
    ) -> tuple[LayerActivation, np.ndarray]:
        """Run layer ``index`` on ``current`` input data (c, h, w, T)."""
        spec = self.net.layers[index]
        num_steps = self.grid.num_steps
        c_in, h_in, w_in = self.net.shapes[index - 1]
        c, h, w = self.net.shapes[index]
        psp = temporal_convolve(self.response, current)
        if spec.kind == "dense":
            psp = psp.reshape(c_in * h_in * w_in, num_steps)
            drive = neuron.linear_drive(weights, psp)
        elif spec.kind == "conv":
            drive = _conv_drive(np.asarray(weights, dtype=np.float64), psp)
        else:
            drive = _pool_drive(psp, spec.pool, self.pool_weight)

        flat_drive = drive.reshape(c * h * w, num_steps)
        if smooth:
            membrane, spikes = flat_drive, neuron.smooth_spike(flat_drive, self.params)
        else:
            membrane, spikes = neuron.spike_recurrence(
                flat_drive, self.refractory, self.params.theta
            )
        shape = (c, num_steps) if spec.kind == "dense" else (c, h, w, num_steps)
        act = LayerActivation(
            membrane.reshape(shape),
            SpikeTensor(spikes.reshape(shape), self.grid),
            psp,
        )
        return act, spikes.reshape(c, h, w, num_steps)


def network_forward(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    input_spikes: SpikeTensor,
    params: NeuronParams,
    smooth: bool = False,
) -> list[LayerActivation]:
    """Run every layer; returns one activation per non-input layer.

    With ``smooth=True`` the hard threshold is replaced by its sigmoid
    relaxation and refractory feedback is dropped (used for gradient
    checks); the default is the spiking simulation.
    """
    c0, h0, w0 = net.input_shape
    if input_spikes.num_units != c0 * h0 * w0:
        raise ValueError(
            f"input has {input_spikes.num_units} units, architecture expects "
            f"{c0 * h0 * w0}"
        )
    if len(weights) != len(net.layers):
        raise ValueError("one weight entry per layer expected (None where fixed)")
    runner = _Runner(net, params, input_spikes.grid)
    current = input_spikes.data.reshape((c0, h0, w0, input_spikes.grid.num_steps))
    activations: list[LayerActivation] = []
    for i in range(1, len(net.layers)):
        act, current = runner.layer_forward(i, weights[i], current, smooth)
        activations.append(act)
    return activations


def network_backward(
    net: NetworkSpec,
    weights: list[DenseTensor | None],
    activations: list[LayerActivation],
    grad_output: DenseTensor,
    params: NeuronParams,
    smooth: bool = False,
) -> list[DenseTensor | None]:
    """Chain the layer backward passes; returns weight gradients per layer.

    ``grad_output`` is dL/ds for the final layer's spikes. Entries are None
    for the input and pool layers (no trainable weights).
    """
    grid = activations[-1].spikes.grid
    response = params.response_kernel(grid)
    pool_weight = net.pool_weight_scale * params.theta

    grads: list[DenseTensor | None] = [None] * len(net.layers)
    grad_spikes = np.asarray(grad_output, dtype=np.float64)
    for i in range(len(net.layers) - 1, 0, -1):
        spec = net.layers[i]
        act = activations[i - 1]
        c, h, w = net.shapes[i]
        c_in, h_in, w_in = net.shapes[i - 1]
        if smooth:
            deriv = neuron.smooth_spike_derivative(act.membrane, params)
        else:
            deriv = neuron.surrogate_derivative(act.membrane, params)
        error = grad_spikes.reshape(act.membrane.shape) * deriv

        if spec.kind == "dense":
            flat_error = error.reshape(spec.units, grid.num_steps)
            grads[i] = flat_error @ act.synaptic_drive.T
            grad_psp = np.asarray(weights[i]).T @ flat_error
        elif spec.kind == "conv":
            grads[i], grad_psp = _conv_backward(
                np.asarray(weights[i], dtype=np.float64),
                act.synaptic_drive,
                error.reshape(c, h, w, grid.num_steps),
            )
        else:
            grad_psp = _pool_backward(
                act.synaptic_drive.shape,
                error.reshape(c, h, w, grid.num_steps),
                spec.pool,
                pool_weight,
            )
        grad_spikes = temporal_correlate(response, grad_psp).reshape(
            (c_in, h_in, w_in, grid.num_steps)
        )
    return grads


def init_weights(
    net: NetworkSpec,
    params: NeuronParams,
    rng: np.random.Generator,
    calibration: list[SpikeTensor] | None = None,
    rate_band: tuple[float, float] = (0.05, 0.3),
    max_rounds: int = 40,
) -> list[DenseTensor | None]:
    """Uniform [-a, a] weights with a per-layer calibrated scale.

    When calibration samples are given, each trainable layer's scale is
    adjusted geometrically until the layer's mean firing rate on those
    samples lands inside ``rate_band`` (spikes per neuron per bin). Layers
    are calibrated in order, each seeing the spiking statistics of the
    already initialized stack. Deterministic given the generator state;
    bounded by ``max_rounds`` adjustments per layer.
    """
    weights: list[DenseTensor | None] = [None] * len(net.layers)
    base: list[np.ndarray | None] = [None] * len(net.layers)
    scales: list[float] = [0.0] * len(net.layers)
    for i in range(1, len(net.layers)):
        shape = weight_shape(net, i)
        if shape is not None:
            base[i] = rng.uniform(-1.0, 1.0, size=shape)
            fan_in = int(np.prod(shape[1:]))
            scales[i] = params.theta / max(1.0, math.sqrt(fan_in))
            weights[i] = scales[i] * base[i]

    if not calibration:
        return weights

    lo, hi = rate_band
    grid = calibration[0].grid
    runner = _Runner(net, params, grid)
    c0, h0, w0 = net.input_shape
    inputs = [
        s.data.reshape(c0, h0, w0, grid.num_steps) for s in calibration
    ]
    for i in range(1, len(net.layers)):
        if base[i] is not None:
            for _ in range(max_rounds):
                weights[i] = scales[i] * base[i]
                total, size = 0.0, 0
                for x in inputs:
                    _, spikes = runner.layer_forward(i, weights[i], x, smooth=False)
                    total += float(spikes.sum())
                    size += spikes.size
                rate = total / size if size else 0.0
                if rate < lo:
                    scales[i] *= 1.6
                elif rate > hi:
                    scales[i] /= 1.6
                else:
                    break
            weights[i] = scales[i] * base[i]
        inputs = [runner.layer_forward(i, weights[i], x, smooth=False)[1] for x in inputs]
    return weights
