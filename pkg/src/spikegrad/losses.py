"""Loss functions on output spike trains, with analytic gradients.

Classification losses interpret output spikes as votes. With the trailing
windowed count

    c_i(t) = sum of s_i over the last W bins (truncated at the record start)

the probability estimate p_i(t) = (c_i(t) + eps) / sum_k (c_k(t) + eps)
feeds a negative log-likelihood:

  * spikemax:   time-averaged NLL of the running windowed estimate,
                L = (1/T) sum_t -log p_y(t)
  * spikemax_g: NLL of the whole-record count estimate, L = -log p_y
  * spikemax_s: NLL of the softmax over whole-record counts

plus two baselines:

  * spike_rate: squared error between per-neuron rates c_i/T and
    class-dependent target rates
  * van_rossum: L2 distance between response-filtered spike trains, for
    regression against a known target train

Gradients come in two modes. ``exact`` (the default) differentiates the
implemented loss exactly, so central finite differences on relaxed
real-valued spike tensors agree to first order; for the sliding-window loss
that means summing each bin's contribution over every window containing it.
``per_bin`` instead applies the closed forms

    spikemax:   (1/T) (p_i(t) - y_i) W / (c_i(t) + eps)
    spikemax_g: (p_i - y_i) T / (c_i + eps)

which treat a spike as if it entered only its own bin's window, scaled by
the window length; they agree with the exact gradients when counts are flat
across the window span. The spikemax_s, spike_rate and van_rossum gradients
are identical in both modes. The stabilizer eps enters the numerator and
denominator of every probability (keeping columns summing to 1 exactly) and
the gradient denominators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import build_response_kernel, temporal_convolve, temporal_correlate
from .tensors import DenseTensor, SpikeTensor

LOSS_KINDS = ("van_rossum", "spike_rate", "spikemax", "spikemax_g", "spikemax_s")
GRADIENT_MODES = ("exact", "per_bin")

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class LossConfig:
    """Loss selector plus its parameters.

    ``window`` applies to the sliding-window loss only, in bins. The count
    losses need no target-rate tuning; supplying rates for them is rejected.
    """

    kind: str
    window: int | None = None
    rate_true: float | None = None
    rate_false: float | None = None
    eps: float = DEFAULT_EPS
    tau_s: float | None = None  # van_rossum filter time constant (ms)
    gradient_mode: str = "exact"

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(
                f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}"
            )
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(
                f"unknown gradient_mode {self.gradient_mode!r}; "
                f"expected one of {GRADIENT_MODES}"
            )
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.kind == "spikemax":
            if self.window is None or self.window < 1:
                raise ValueError("spikemax needs a window of at least 1 bin")
        elif self.window is not None:
            raise ValueError(f"{self.kind} takes no window")
        if self.kind == "spike_rate":
            for name, value in (("rate_true", self.rate_true), ("rate_false", self.rate_false)):
                if value is None:
                    raise ValueError(f"spike_rate needs {name}")
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"{name} must be in [0, 1], got {value}")
        elif self.rate_true is not None or self.rate_false is not None:
            raise ValueError(f"{self.kind} takes no target rates")
        if self.kind == "van_rossum":
            if self.tau_s is None or not self.tau_s > 0:
                raise ValueError("van_rossum needs a positive tau_s")
        elif self.tau_s is not None:
            raise ValueError(f"{self.kind} takes no tau_s")


@dataclass(frozen=True)
class LossResult:
    """Scalar loss and its gradient with respect to the output spikes."""

    value: float
    grad_spikes: DenseTensor


def _class_data(output: SpikeTensor) -> np.ndarray:
    """Output spikes as (classes, T)."""
    return output.flat()


def _check_class(num_classes: int, target_class: int) -> None:
    if not 0 <= target_class < num_classes:
        raise ValueError(
            f"target class {target_class} out of range for {num_classes} outputs"
        )


def windowed_counts(spikes: SpikeTensor | np.ndarray, window: int) -> DenseTensor:
    """Trailing spike counts c[t] = sum of s over [t - window + 1, t].

    The window is truncated at the start of the record, so early bins count
    over fewer than ``window`` bins.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    data = spikes.data if isinstance(spikes, SpikeTensor) else np.asarray(spikes, float)
    cum = np.cumsum(data, axis=-1)
    counts = cum.copy()
    if window < data.shape[-1]:
        counts[..., window:] -= cum[..., :-window]
    return counts


def windowed_counts_adjoint(grad: np.ndarray, window: int) -> DenseTensor:
    """Adjoint of :func:`windowed_counts`: leading sums over [t, t + window - 1].

    <windowed_counts(s), g> == <s, windowed_counts_adjoint(g)> for all s, g;
    this distributes a per-window quantity back onto every bin inside it.
    """
    return windowed_counts(np.flip(grad, axis=-1), window)[..., ::-1].copy()


def probability_estimate(counts: DenseTensor, eps: float = DEFAULT_EPS) -> DenseTensor:
    """Stabilized ratio estimate p_i = (c_i + eps) / sum_k (c_k + eps).

    Columns sum to 1 exactly; the class axis is the first axis.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    stabilized = np.asarray(counts, dtype=np.float64) + eps
    return stabilized / stabilized.sum(axis=0, keepdims=True)


def spikemax_loss(
    output: SpikeTensor, target_class: int, cfg: LossConfig
) -> LossResult:
    """Time-averaged NLL of the sliding-window probability estimate."""
    spikes = _class_data(output)
    num_classes, num_steps = spikes.shape
    _check_class(num_classes, target_class)
    window = cfg.window
    counts = windowed_counts(spikes, window)
    probs = probability_estimate(counts, cfg.eps)
    value = float(-np.log(probs[target_class]).mean())

    one_hot = np.zeros((num_classes, 1))
    one_hot[target_class, 0] = 1.0
    per_count = (probs - one_hot) / (counts + cfg.eps) / num_steps
    if cfg.gradient_mode == "exact":
        grad = windowed_counts_adjoint(per_count, window)
    else:
        grad = per_count * window
    return LossResult(value, grad.reshape(output.data.shape))


def spikemax_g_loss(
    output: SpikeTensor, target_class: int, cfg: LossConfig
) -> LossResult:
    """NLL of the whole-record count probability estimate."""
    spikes = _class_data(output)
    num_classes, num_steps = spikes.shape
    _check_class(num_classes, target_class)
    counts = spikes.sum(axis=-1)
    probs = probability_estimate(counts, cfg.eps)
    value = float(-np.log(probs[target_class]))

    one_hot = np.zeros(num_classes)
    one_hot[target_class] = 1.0
    per_count = (probs - one_hot) / (counts + cfg.eps)
    if cfg.gradient_mode == "per_bin":
        per_count = per_count * num_steps
    grad = np.broadcast_to(per_count[:, None], spikes.shape)
    return LossResult(value, np.array(grad).reshape(output.data.shape))


def spikemax_s_loss(
    output: SpikeTensor, target_class: int, cfg: LossConfig
) -> LossResult:
    """NLL of the softmax over whole-record counts.

    The per-bin gradient is exactly p_i - y_i in both modes; softmax is
    computed with max subtraction since counts can reach hundreds.
    """
    spikes = _class_data(output)
    num_classes, _ = spikes.shape
    _check_class(num_classes, target_class)
    counts = spikes.sum(axis=-1)
    shifted = counts - counts.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    value = float(np.log(exp.sum()) - shifted[target_class])

    one_hot = np.zeros(num_classes)
    one_hot[target_class] = 1.0
    grad = np.broadcast_to((probs - one_hot)[:, None], spikes.shape)
    return LossResult(value, np.array(grad).reshape(output.data.shape))


def spike_rate_loss(
    output: SpikeTensor, target_class: int, cfg: LossConfig
) -> LossResult:
    """Squared error between per-neuron spike rates and class targets."""
    spikes = _class_data(output)
    num_classes, num_steps = spikes.shape
    _check_class(num_classes, target_class)
    rates = spikes.sum(axis=-1) / num_steps
    targets = np.full(num_classes, cfg.rate_false, dtype=np.float64)
    targets[target_class] = cfg.rate_true
    diff = rates - targets
    value = float((diff**2).sum())
    grad = np.broadcast_to((2.0 * diff / num_steps)[:, None], spikes.shape)
    return LossResult(value, np.array(grad).reshape(output.data.shape))


def van_rossum_loss(
    output: SpikeTensor, target: SpikeTensor, cfg: LossConfig
) -> LossResult:
    """Distance between response-filtered output and target trains.

    e(t) = (eps_kernel * (s - s_target))(t); L = sum e(t)^2 dt. The gradient
    is 2 (eps_kernel (.) e)(t) dt, the adjoint of the forward filter.
    """
    if output.data.shape != target.data.shape:
        raise ValueError(
            f"output shape {output.data.shape} does not match target "
            f"{target.data.shape}"
        )
    kernel = build_response_kernel(cfg.tau_s, output.grid)
    dt = output.grid.dt
    residual = output.data - target.data
    filtered = temporal_convolve(kernel, residual)
    value = float((filtered**2).sum() * dt)
    grad = 2.0 * temporal_correlate(kernel, filtered) * dt
    return LossResult(value, grad)


_CLASSIFICATION_LOSSES = {
    "spikemax": spikemax_loss,
    "spikemax_g": spikemax_g_loss,
    "spikemax_s": spikemax_s_loss,
    "spike_rate": spike_rate_loss,
}


def classification_loss(
    output: SpikeTensor, target_class: int, cfg: LossConfig
) -> LossResult:
    """Dispatch on cfg.kind for label-based training.

    van_rossum is a regression loss against a known target train and is not
    available here; use :func:`van_rossum_loss` directly.
    """
    fn = _CLASSIFICATION_LOSSES.get(cfg.kind)
    if fn is None:
        raise ValueError(
            f"loss kind {cfg.kind!r} needs a target spike train, not a class label"
        )
    return fn(output, target_class, cfg)
