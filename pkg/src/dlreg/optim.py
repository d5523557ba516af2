"""SGD with classical momentum and a stepped exponential lr schedule."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, ShapeError
from .nn import Gradients, Network


@dataclass
class ExpSchedule:
    """lr(epoch) = base_lr * decay ** (epoch // period_epochs)."""

    base_lr: float
    decay: float = 0.96
    period_epochs: int = 30

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError(f"decay must be in (0, 1], got {self.decay}")
        if self.period_epochs < 1:
            raise ConfigError(f"period_epochs must be >= 1, got {self.period_epochs}")


def lr_at(sched: ExpSchedule, epoch: int) -> float:
    """Learning rate for a given epoch, stepped down once per period."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return sched.base_lr * sched.decay ** (epoch // sched.period_epochs)


@dataclass
class OptimizerState:
    velocity_w: list[NDArray[np.float64]]
    velocity_b: list[NDArray[np.float64]]
    momentum: float


def init_optimizer(net: Network, momentum: float = 0.9) -> OptimizerState:
    """Zero velocities shaped like the network's parameters."""
    if not 0.0 <= momentum < 1.0:
        raise ConfigError(f"momentum must be in [0, 1), got {momentum}")
    return OptimizerState(
        velocity_w=[np.zeros_like(layer.weights) for layer in net.layers],
        velocity_b=[np.zeros_like(layer.biases) for layer in net.layers],
        momentum=momentum,
    )


def sgd_step(net: Network, grads: Gradients, state: OptimizerState, lr: float) -> None:
    """One heavy-ball update: v <- momentum*v + g, p <- p - lr*v (in place)."""
    if lr <= 0:
        raise ConfigError(f"lr must be > 0, got {lr}")
    if len(grads.weights) != len(net.layers) or len(state.velocity_w) != len(
        net.layers
    ):
        raise ShapeError("gradient/velocity layer counts do not match the network")
    for k, layer in enumerate(net.layers):
        if grads.weights[k].shape != layer.weights.shape:
            raise ShapeError(
                f"layer {k}: gradient shape {grads.weights[k].shape} != "
                f"weights {layer.weights.shape}"
            )
        state.velocity_w[k] = state.momentum * state.velocity_w[k] + grads.weights[k]
        state.velocity_b[k] = state.momentum * state.velocity_b[k] + grads.biases[k]
        layer.weights -= lr * state.velocity_w[k]
        layer.biases -= lr * state.velocity_b[k]
