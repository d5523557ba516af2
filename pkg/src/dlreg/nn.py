"""Fully-connected networks: forward, softmax cross-entropy, backward.

Layers are plain weight/bias pairs with a ReLU or identity activation and
an optional dropout rate applied to the layer's *input*. Dropout is the
inverted kind: surviving units are scaled by ``1/(1 - rate)`` at train
time so evaluation runs the raw network unchanged.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, ShapeError, StateError, TargetError
from .linalg import as_matrix

ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    weights: NDArray[np.float64]  # (in_dim, out_dim)
    biases: NDArray[np.float64]  # (out_dim,)
    activation: str = "relu"
    dropout_rate: float = 0.0  # applied to this layer's input

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError("layer weights must be 2-D")
        if self.biases.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"biases shape {self.biases.shape} does not match "
                f"out_dim {self.weights.shape[1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class Network:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass
class ForwardCache:
    """Everything the backward pass needs to replay one forward pass.

    ``dropout_masks[k]`` is the multiplier applied to layer k's input
    (already including the 1/(1-rate) survivor scaling), or None when no
    dropout was applied — eval mode, or a zero rate — which is equivalent
    to an all-ones mask.
    """

    mode: str
    layer_inputs: list[NDArray] = field(default_factory=list)  # post-dropout
    pre_activations: list[NDArray] = field(default_factory=list)
    post_activations: list[NDArray] = field(default_factory=list)
    dropout_masks: list[NDArray | None] = field(default_factory=list)

    @property
    def logits(self) -> NDArray[np.float64]:
        return self.post_activations[-1]

    @property
    def depth(self) -> int:
        return len(self.layer_inputs)


@dataclass
class Gradients:
    weights: list[NDArray[np.float64]]
    biases: list[NDArray[np.float64]]


def init_network(
    sizes,
    activations=None,
    dropout_rates=None,
    seed=0,
) -> Network:
    """Build a network of dense layers with He-style fan-in uniform init.

    ``sizes`` lists the widths, e.g. ``[784, 1024, 10]`` builds two layers.
    Hidden layers default to ReLU, the last layer to identity (logits).
    Weights are drawn uniformly from ``[-sqrt(6/fan_in), sqrt(6/fan_in)]``,
    biases start at zero; fixed seeds give identical networks.
    """
    sizes = list(sizes)
    if len(sizes) < 2:
        raise ConfigError("network spec needs at least an input and an output size")
    if any(int(s) != s or s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must be positive integers, got {sizes}")
    n_layers = len(sizes) - 1
    if activations is None:
        activations = ["relu"] * (n_layers - 1) + ["identity"]
    if dropout_rates is None:
        dropout_rates = [0.0] * n_layers
    if len(activations) != n_layers or len(dropout_rates) != n_layers:
        raise ConfigError(
            f"need {n_layers} activations and dropout rates for {len(sizes)} sizes"
        )

    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act, rate in zip(sizes, sizes[1:], activations, dropout_rates):
        limit = np.sqrt(6.0 / fan_in)
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(
            DenseLayer(
                weights=weights,
                biases=np.zeros(fan_out),
                activation=act,
                dropout_rate=float(rate),
            )
        )
    return Network(layers=layers)


def forward(net: Network, x, mode: str = "eval", rng=None) -> ForwardCache:
    """Run the network on a batch of rows, caching intermediates.

    In ``train`` mode each layer's input is masked independently with its
    dropout rate and survivors are scaled by ``1/(1 - rate)``; ``eval``
    mode ignores dropout entirely and uses no randomness.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = as_matrix(x)
    if x.shape[1] != net.input_dim:
        raise ShapeError(
            f"input has {x.shape[1]} columns, network expects {net.input_dim}"
        )
    if mode == "train" and rng is None:
        rng = np.random.default_rng()

    cache = ForwardCache(mode=mode)
    current = x
    for layer in net.layers:
        if mode == "train" and layer.dropout_rate > 0.0:
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(current.shape) < keep) / keep
            current = current * mask
        else:
            mask = None
        pre = current @ layer.weights + layer.biases
        post = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
        cache.dropout_masks.append(mask)
        cache.layer_inputs.append(current)
        cache.pre_activations.append(pre)
        cache.post_activations.append(post)
        current = post
    return cache


def softmax_cross_entropy(logits, targets) -> tuple[float, NDArray[np.float64]]:
    """Mean cross-entropy of row-wise softmax against one-hot targets.

    Returns ``(loss, grad_logits)`` where ``grad_logits`` is
    ``(softmax(logits) - targets) / rows``. Log-probabilities are computed
    with max subtraction, so huge logits do not overflow.
    """
    logits = as_matrix(logits)
    targets = as_matrix(targets)
    if logits.shape != targets.shape:
        raise ShapeError(
            f"logits {logits.shape} and targets {targets.shape} must match"
        )
    if not np.all((targets == 0.0) | (targets == 1.0)) or not np.all(
        targets.sum(axis=1) == 1.0
    ):
        raise TargetError("each target row must be one-hot")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = logits.shape[0]
    loss = -float(np.sum(log_probs * targets)) / rows
    grad = (np.exp(log_probs) - targets) / rows
    return loss, grad


def backward(net: Network, cache: ForwardCache, grad_logits) -> Gradients:
    """Backpropagate an upstream gradient on the logits through the cache.

    Dropout masks recorded during the forward pass are replayed, so the
    gradients correspond to exactly the thinned network that produced the
    cached logits.
    """
    if cache.depth != len(net.layers):
        raise StateError(
            f"cache depth {cache.depth} does not match network depth {len(net.layers)}"
        )
    grad_logits = as_matrix(grad_logits)
    if grad_logits.shape != cache.logits.shape:
        raise ShapeError(
            f"grad shape {grad_logits.shape} does not match logits "
            f"{cache.logits.shape}"
        )
    for layer, inputs in zip(net.layers, cache.layer_inputs):
        if inputs.shape[1] != layer.in_dim:
            raise StateError("cache does not belong to this network")

    grad_w = [np.empty(0)] * len(net.layers)
    grad_b = [np.empty(0)] * len(net.layers)
    delta = grad_logits  # d loss / d post_activation of current layer
    for k in reversed(range(len(net.layers))):
        layer = net.layers[k]
        if layer.activation == "relu":
            delta = delta * (cache.pre_activations[k] > 0.0)
        grad_w[k] = cache.layer_inputs[k].T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ layer.weights.T
            if cache.dropout_masks[k] is not None:
                delta = delta * cache.dropout_masks[k]
    return Gradients(weights=grad_w, biases=grad_b)
