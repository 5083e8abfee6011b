"""Spiking neural network training with spike-count likelihood losses.

The package simulates layers of threshold neurons driven by response
kernels, trains them with surrogate-gradient temporal backpropagation, and
scores classification output with count-based negative log-likelihood
losses alongside spike-rate and van-Rossum baselines.
"""

from .analysis import (
    LatencyCurve,
    SpikeCountReport,
    classify,
    classify_at,
    latency_curve,
    spike_report,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .events import (
    DatasetManifest,
    EventRecord,
    gen_synthetic,
    load_dataset,
    load_manifest,
    rasterize,
    read_event_csv,
    read_nmnist_bin,
    write_nmnist_bin,
)
from .kernels import (
    KernelVector,
    build_refractory_kernel,
    build_response_kernel,
    temporal_convolve,
    temporal_correlate,
)
from .losses import (
    LossConfig,
    LossResult,
    classification_loss,
    probability_estimate,
    spike_rate_loss,
    spikemax_g_loss,
    spikemax_loss,
    spikemax_s_loss,
    van_rossum_loss,
    windowed_counts,
)
from .network import (
    LayerSpec,
    NetworkSpec,
    count_parameters,
    init_weights,
    network_backward,
    network_forward,
    parse_architecture,
    render,
)
from .neuron import (
    LayerActivation,
    NeuronParams,
    backward,
    forward,
    forward_smooth,
    surrogate_derivative,
)
from .optim import OptimizerState, adam_step, init_optimizer, sgd_step
from .tensors import (
    DenseTensor,
    SpikeTensor,
    TimeGrid,
    elementwise_axpy,
    reduce_time_sum,
    zeros,
)
from .training import EpochMetrics, NaNLossError, Trainer, evaluate, train_epoch

__version__ = "0.1.0"
