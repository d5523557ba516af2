"""Finite-difference verification of every gradient path.

Backpropagated gradients are compared against central differences for
the plain data loss, the data loss plus L2, and the data loss plus the
linear-fit penalty (with the map held fixed, as during training).
"""

import numpy as np

from dlreg import (
    augment_ones,
    backward,
    dlreg_penalty,
    forward,
    init_dlreg_state,
    init_network,
    l2_penalty,
    softmax_cross_entropy,
)
from dlreg.checks import max_rel_err, param_fd_grads
from dlreg.regularizers import dlreg_update_z

rng = np.random.default_rng(1)
net = init_network([20, 12, 5], seed=0)
x = rng.standard_normal((8, 20))
targets = np.eye(5)[rng.integers(0, 5, 8)]

state = init_dlreg_state(20, 5, gamma=1e-3)
dlreg_update_z(augment_ones(rng.standard_normal((8, 20))), rng.standard_normal((8, 5)), state)
L2_GAMMA = 5e-4


def data_loss():
    return softmax_cross_entropy(forward(net, x).logits, targets)[0]


def data_plus_l2():
    return data_loss() + l2_penalty(net, L2_GAMMA)[0]


def data_plus_linear_fit():
    cache = forward(net, x)
    loss, _ = softmax_cross_entropy(cache.logits, targets)
    return loss + dlreg_penalty(augment_ones(x), cache.logits, state)[0]


def analytic(kind):
    cache = forward(net, x)
    loss, grad_logits = softmax_cross_entropy(cache.logits, targets)
    if kind == "dlreg":
        _, grad_pen = dlreg_penalty(augment_ones(x), cache.logits, state)
        grad_logits = grad_logits + grad_pen
    grads = backward(net, cache, grad_logits)
    if kind == "l2":
        _, l2g = l2_penalty(net, L2_GAMMA)
        for k in range(len(net.layers)):
            grads.weights[k] = grads.weights[k] + l2g.weights[k]
    return grads


for kind, loss_fn in (
    ("data", data_loss),
    ("l2", data_plus_l2),
    ("dlreg", data_plus_linear_fit),
):
    grads = analytic(kind)
    fd_w, fd_b = param_fd_grads(net, loss_fn)
    worst = max(
        max(max_rel_err(grads.weights[k], fd_w[k]) for k in range(len(net.layers))),
        max(max_rel_err(grads.biases[k], fd_b[k]) for k in range(len(net.layers))),
    )
    print(f"{kind:6s} loss: max relative gradient error {worst:.2e}")

print("\nall three paths should sit well below 1e-4")
