"""Stochastic gradient optimizers over per-layer weight lists.

Weight lists mirror the network layer list: one array per trainable layer,
None where a layer has no weights. Steps return new weight lists; slot
state (momentum, moments) is updated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import DenseTensor

OPTIMIZER_KINDS = ("adam", "sgd_momentum")


@dataclass
class OptimizerState:
    kind: str
    lr: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    step_count: int = 0
    slots: dict[str, list[DenseTensor | None]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(
                f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZER_KINDS}"
            )
        if self.lr < 0:
            raise ValueError(f"lr must be nonnegative, got {self.lr}")
        for name, value in (
            ("momentum", self.momentum),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ):
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")


def init_optimizer(kind: str, weights: list[DenseTensor | None], **kwargs) -> OptimizerState:
    state = OptimizerState(kind=kind, **kwargs)
    zero = lambda: [None if w is None else np.zeros_like(w) for w in weights]
    if kind == "adam":
        state.slots = {"m": zero(), "v": zero()}
    else:
        state.slots = {"velocity": zero()}
    return state


def sgd_step(
    state: OptimizerState,
    weights: list[DenseTensor | None],
    grads: list[DenseTensor | None],
) -> list[DenseTensor | None]:
    """Momentum SGD; with momentum 0 this is plain gradient descent."""
    state.step_count += 1
    velocity = state.slots["velocity"]
    updated: list[DenseTensor | None] = []
    for i, (w, g) in enumerate(zip(weights, grads)):
        if w is None:
            updated.append(None)
            continue
        velocity[i] = state.momentum * velocity[i] + g
        updated.append(w - state.lr * velocity[i])
    return updated


def adam_step(
    state: OptimizerState,
    weights: list[DenseTensor | None],
    grads: list[DenseTensor | None],
) -> list[DenseTensor | None]:
    """Adam with bias correction."""
    state.step_count += 1
    t = state.step_count
    m, v = state.slots["m"], state.slots["v"]
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    updated: list[DenseTensor | None] = []
    for i, (w, g) in enumerate(zip(weights, grads)):
        if w is None:
            updated.append(None)
            continue
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g**2
        m_hat = m[i] / bias1
        v_hat = v[i] / bias2
        updated.append(w - state.lr * m_hat / (np.sqrt(v_hat) + state.adam_eps))
    return updated


def apply_step(
    state: OptimizerState,
    weights: list[DenseTensor | None],
    grads: list[DenseTensor | None],
) -> list[DenseTensor | None]:
    if state.kind == "adam":
        return adam_step(state, weights, grads)
    return sgd_step(state, weights, grads)
