"""Regularizers: the linear-fit penalty with its update lifecycle, plus
L2 and decoupled weight decay baselines.

The linear-fit penalty keeps a linear map from ones-augmented inputs to
the network's output space and charges the network ``gamma`` times the
squared error of that map's predictions against the actual outputs. The
map is refit in closed form after every parameter update; the penalty at
a given step therefore uses the map produced by *earlier* batches. A
fresh fit on the current batch would interpolate it exactly whenever the
batch is smaller than the input dimension, making the penalty identically
zero — the lag is what keeps the signal alive.

Because the penalty never looks at labels, it can also drive updates on
unlabeled batches (see ``experiments.semi_supervised_step``).
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, ShapeError, StateError
from .linalg import as_matrix, frobenius_sq, lstsq
from .nn import Gradients, Network

UPDATE_POLICIES = ("closed_form_lagged", "ema")


@dataclass
class AugmentedBatch:
    """A batch of inputs with a trailing all-ones column (bias multipliers)."""

    data: NDArray[np.float64]  # (s, n + 1)

    @property
    def sample_count(self) -> int:
        return self.data.shape[0]

    @property
    def input_dim(self) -> int:
        return self.data.shape[1] - 1


def augment_ones(x) -> AugmentedBatch:
    """Append a column of ones to a nonempty batch of input rows."""
    x = as_matrix(x)
    return AugmentedBatch(np.hstack([x, np.ones((x.shape[0], 1))]))


@dataclass
class DlRegState:
    """The linear map, its refresh policy, and the penalty factor.

    ``linear_map`` has shape (n+1, c); its last row plays the role of a
    bias. Until the first refresh it holds only a random placeholder and
    the penalty refuses to run (``initialized`` is False). The first
    refresh always adopts the closed-form solution outright; afterwards
    ``closed_form_lagged`` keeps replacing it wholesale while ``ema``
    blends ``(1 - beta) * old + beta * new``.

    ``gamma == 0`` disables the penalty exactly.
    """

    linear_map: NDArray[np.float64]  # (n + 1, c)
    gamma: float
    policy: str = "ema"
    beta: float = 0.1
    initialized: bool = False

    def __post_init__(self):
        self.linear_map = as_matrix(self.linear_map)
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.policy not in UPDATE_POLICIES:
            raise ConfigError(f"unknown update policy {self.policy!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"ema beta must be in (0, 1], got {self.beta}")


def init_dlreg_state(
    input_dim: int,
    class_count: int,
    gamma: float,
    policy: str = "ema",
    beta: float = 0.1,
    seed=0,
) -> DlRegState:
    """Fresh state with a random placeholder map, not yet usable for penalties."""
    if input_dim < 1 or class_count < 1:
        raise ConfigError("input_dim and class_count must be positive")
    placeholder = 0.01 * np.random.default_rng(seed).standard_normal(
        (input_dim + 1, class_count)
    )
    return DlRegState(
        linear_map=placeholder, gamma=gamma, policy=policy, beta=beta
    )


def _check_penalty_shapes(batch: AugmentedBatch, outputs, state: DlRegState):
    outputs = as_matrix(outputs)
    if outputs.shape[0] != batch.sample_count:
        raise ShapeError(
            f"outputs have {outputs.shape[0]} rows, batch has {batch.sample_count}"
        )
    if state.linear_map.shape != (batch.data.shape[1], outputs.shape[1]):
        raise ShapeError(
            f"linear map {state.linear_map.shape} does not match batch width "
            f"{batch.data.shape[1]} and output width {outputs.shape[1]}"
        )
    return outputs


def dlreg_penalty(
    batch: AugmentedBatch, outputs, state: DlRegState
) -> tuple[float, NDArray[np.float64]]:
    """Penalty value and its gradient w.r.t. the network outputs.

    value = gamma * ||batch @ map - outputs||_F^2, not normalized by the
    batch size. The map is treated as a constant: no gradient flows into
    it from here. Requires an initialized state.
    """
    if not state.initialized:
        raise StateError("linear map has not been fit yet; refresh it first")
    outputs = _check_penalty_shapes(batch, outputs, state)
    if state.gamma == 0.0:
        return 0.0, np.zeros_like(outputs)
    residual = outputs - batch.data @ state.linear_map
    value = state.gamma * frobenius_sq(residual)
    grad_outputs = (2.0 * state.gamma) * residual
    return value, grad_outputs


def dlreg_update_z(batch: AugmentedBatch, outputs, state: DlRegState) -> None:
    """Refit the linear map on a batch and fold it in per the state's policy.

    The closed-form fit interpolates exactly when the batch is fat
    (fewer samples than augmented input width) and solves the normal
    equations otherwise. The first call adopts the fit unconditionally.
    """
    outputs = _check_penalty_shapes(batch, outputs, state)
    fitted = lstsq(batch.data, outputs)
    if not state.initialized or state.policy == "closed_form_lagged":
        state.linear_map = fitted
    else:
        state.linear_map = (1.0 - state.beta) * state.linear_map + state.beta * fitted
    state.initialized = True


def l2_penalty(net: Network, gamma: float) -> tuple[float, Gradients]:
    """(gamma / 2) * sum of squared weights, with per-weight gradient gamma * w.

    Biases are excluded, as is standard.
    """
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    value = 0.0
    grad_w = []
    grad_b = []
    for layer in net.layers:
        value += frobenius_sq(layer.weights)
        grad_w.append(gamma * layer.weights)
        grad_b.append(np.zeros_like(layer.biases))
    return 0.5 * gamma * value, Gradients(weights=grad_w, biases=grad_b)


def decoupled_weight_decay(net: Network, lam: float, lr: float) -> None:
    """Shrink every weight by the factor (1 - lr * lam), in place.

    Applied after the gradient step, outside the loss; biases are left
    untouched.
    """
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    if lr <= 0:
        raise ConfigError(f"lr must be > 0, got {lr}")
    if lam == 0.0:
        return
    factor = 1.0 - lr * lam
    for layer in net.layers:
        layer.weights *= factor
