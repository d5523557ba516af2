"""Finite-difference gradient checking and a built-in self-check suite.

The finite-difference helpers perturb arrays in place and re-evaluate a
scalar closure, so they are independent of the backward pass they are
used to verify. ``run_self_checks`` drives a curated set of fast
invariant checks for the ``check`` CLI verb.
"""

import numpy as np


def central_diff(f, array, eps=1e-6):
    """Central-difference gradient of scalar ``f()`` w.r.t. ``array``'s entries.

    ``array`` is perturbed in place and restored; ``f`` must read it afresh
    on every call.
    """
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = array[idx]
        array[idx] = orig + eps
        f_plus = f()
        array[idx] = orig - eps
        f_minus = f()
        array[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def param_fd_grads(net, loss_fn, eps=1e-6):
    """Finite-difference gradients of ``loss_fn()`` w.r.t. every network parameter."""
    grad_w = [central_diff(loss_fn, layer.weights, eps) for layer in net.layers]
    grad_b = [central_diff(loss_fn, layer.biases, eps) for layer in net.layers]
    return grad_w, grad_b


def max_rel_err(analytic, numeric, floor=1e-6):
    """Largest elementwise relative error, with a floor guarding tiny entries."""
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(num / den))


def _check_matmul_oracle():
    from .linalg import matmul

    rng = np.random.default_rng(101)
    a, b = rng.standard_normal((6, 4)), rng.standard_normal((4, 5))
    naive = np.array(
        [[sum(a[i, k] * b[k, j] for k in range(4)) for j in range(5)] for i in range(6)]
    )
    err = float(np.max(np.abs(matmul(a, b) - naive)))
    return err < 1e-12, f"max |blas - naive| = {err:.2e}"


def _check_spd_solve():
    from .linalg import solve_spd

    rng = np.random.default_rng(102)
    q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
    g = (q * rng.uniform(0.5, 2.0, 10)) @ q.T
    b = rng.standard_normal((10, 3))
    s = solve_spd(g, b)
    resid = float(np.linalg.norm(g @ s - b) / np.linalg.norm(b))
    svd_gap = float(np.max(np.abs(s - np.linalg.pinv(g) @ b)))
    return resid < 1e-8 and svd_gap < 1e-8, f"residual {resid:.2e}, svd gap {svd_gap:.2e}"


def _check_lstsq_fat():
    from .linalg import lstsq

    rng = np.random.default_rng(103)
    xb, f = rng.standard_normal((8, 64)), rng.standard_normal((8, 5))
    resid = float(np.linalg.norm(xb @ lstsq(xb, f) - f))
    return resid < 1e-6, f"interpolation residual {resid:.2e}"


def _check_lstsq_tall():
    from .linalg import lstsq

    rng = np.random.default_rng(104)
    xb, f = rng.standard_normal((200, 16)), rng.standard_normal((200, 5))
    z = lstsq(xb, f)
    ortho = float(np.linalg.norm(xb.T @ (xb @ z - f)))
    svd_gap = float(np.max(np.abs(z - np.linalg.pinv(xb) @ f)))
    return ortho < 1e-6 and svd_gap < 1e-6, f"orthogonality {ortho:.2e}, svd gap {svd_gap:.2e}"


def _check_cross_entropy_grad():
    from .nn import softmax_cross_entropy

    rng = np.random.default_rng(105)
    logits = rng.standard_normal((5, 3))
    targets = np.eye(3)[rng.integers(0, 3, 5)]
    _, grad = softmax_cross_entropy(logits, targets)
    fd = central_diff(lambda: softmax_cross_entropy(logits, targets)[0], logits)
    err = float(np.max(np.abs(grad - fd)))
    return err < 1e-6, f"max |analytic - fd| = {err:.2e}"


def _check_backward_grad():
    from .nn import backward, forward, init_network, softmax_cross_entropy

    rng = np.random.default_rng(106)
    net = init_network([12, 6, 3], seed=1)
    x = rng.standard_normal((5, 12))
    targets = np.eye(3)[rng.integers(0, 3, 5)]

    def loss_fn():
        return softmax_cross_entropy(forward(net, x).logits, targets)[0]

    cache = forward(net, x)
    _, grad_logits = softmax_cross_entropy(cache.logits, targets)
    grads = backward(net, cache, grad_logits)
    fd_w, fd_b = param_fd_grads(net, loss_fn)
    err = max(
        max(max_rel_err(grads.weights[k], fd_w[k]) for k in range(2)),
        max(max_rel_err(grads.biases[k], fd_b[k]) for k in range(2)),
    )
    return err < 1e-4, f"max relative error {err:.2e}"


def _check_penalty_grad():
    from .regularizers import augment_ones, dlreg_penalty, init_dlreg_state

    rng = np.random.default_rng(107)
    state = init_dlreg_state(4, 3, gamma=0.5)
    state.linear_map = rng.standard_normal((5, 3))
    state.initialized = True
    batch = augment_ones(rng.standard_normal((6, 4)))
    outputs = rng.standard_normal((6, 3))
    _, grad = dlreg_penalty(batch, outputs, state)
    fd = central_diff(lambda: dlreg_penalty(batch, outputs, state)[0], outputs)
    err = float(np.max(np.abs(grad - fd)))
    return err < 1e-6, f"max |analytic - fd| = {err:.2e}"


def _check_fat_refresh_degeneracy():
    from .regularizers import augment_ones, dlreg_penalty, dlreg_update_z, init_dlreg_state

    rng = np.random.default_rng(108)
    batch = augment_ones(rng.standard_normal((4, 32)))
    outputs = rng.standard_normal((4, 3))
    state = init_dlreg_state(32, 3, gamma=1.0)
    dlreg_update_z(batch, outputs, state)
    value, _ = dlreg_penalty(batch, outputs, state)
    return value < 1e-9, f"same-batch penalty after refresh = {value:.2e}"


def _check_zero_gamma_identity():
    from .config import parse_config, replace_config
    from .data import Dataset, synthetic_glyphs
    from .experiments import build_network, run_experiment

    imgs, labels = synthetic_glyphs(per_class=6, seed=3, split=0)
    d = Dataset(
        inputs=imgs.reshape(60, -1) / 255.0,
        targets=np.eye(10)[labels],
        class_count=10,
    )
    base = parse_config(
        "net.sizes = 784,16,10\ntrain.epochs = 2\ntrain.batch_size = 20\n"
    )
    off = replace_config(base, reg_kind="dlreg", gamma=0.0)
    ra = run_experiment(base, d, d)
    rb = run_experiment(off, d, d)
    same = all(
        a.train_loss == b.train_loss and a.train_accuracy == b.train_accuracy
        for a, b in zip(ra, rb)
    )
    return same, "gamma=0 run matches unregularized run exactly"


def _check_lr_schedule():
    from .optim import ExpSchedule, lr_at

    sched = ExpSchedule(base_lr=0.1, decay=0.96, period_epochs=30)
    ok = (
        lr_at(sched, 0) == 0.1
        and lr_at(sched, 29) == 0.1
        and abs(lr_at(sched, 30) - 0.096) < 1e-15
        and abs(lr_at(sched, 300) - 0.1 * 0.96**10) < 1e-15
    )
    return ok, "stepped decay matches closed form at epochs 0/29/30/300"


def _check_batch_partition():
    from .data import BatchPlan, Dataset, batches

    rng = np.random.default_rng(109)
    d = Dataset(
        inputs=np.arange(23, dtype=float).reshape(23, 1),
        targets=None,
        class_count=1,
    )
    seen = np.sort(
        np.concatenate(
            [x[:, 0] for x, _ in batches(d, BatchPlan(batch_size=5), epoch=4)]
        )
    )
    ok = np.array_equal(seen, np.arange(23, dtype=float))
    return ok, "one epoch covers every row exactly once"


SELF_CHECKS = (
    ("matmul-oracle", _check_matmul_oracle),
    ("spd-solve", _check_spd_solve),
    ("lstsq-fat-interpolation", _check_lstsq_fat),
    ("lstsq-tall-orthogonality", _check_lstsq_tall),
    ("cross-entropy-gradient", _check_cross_entropy_grad),
    ("backprop-gradient", _check_backward_grad),
    ("penalty-gradient", _check_penalty_grad),
    ("fat-refresh-degeneracy", _check_fat_refresh_degeneracy),
    ("zero-gamma-identity", _check_zero_gamma_identity),
    ("lr-schedule", _check_lr_schedule),
    ("batch-partition", _check_batch_partition),
)


def run_self_checks():
    """Run every built-in check; returns a list of (name, passed, detail)."""
    results = []
    for name, fn in SELF_CHECKS:
        try:
            passed, detail = fn()
        except Exception as err:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(err).__name__}: {err}"
        results.append((name, bool(passed), detail))
    return results
