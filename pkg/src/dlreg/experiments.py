"""Training driver: steps, evaluation, full experiment runs, metrics files.

One experiment is a sequential loop; everything random hangs off
``config.seed`` (network init, per-epoch shuffles, dropout draws, the
labeled/unlabeled split), so a (config, seed) pair pins down every
computed number. Wall times are measurements, not computations, and are
the one per-epoch field that varies between runs.
"""

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .data import BatchPlan, Dataset, batches, load_idx, reduce_dataset
from .errors import ConfigError, StateError
from .nn import Network, backward, forward, init_network, softmax_cross_entropy
from .optim import ExpSchedule, OptimizerState, init_optimizer, lr_at, sgd_step
from .regularizers import (
    DlRegState,
    augment_ones,
    decoupled_weight_decay,
    dlreg_penalty,
    dlreg_update_z,
    init_dlreg_state,
    l2_penalty,
)

CSV_HEADER = "epoch,train_acc,test_acc,train_loss,penalty,lr,wall_ms"
PLOT_SERIES = ("train_acc", "test_acc", "train_loss", "penalty", "lr")

# sub-stream tags for seeding; three-element seeds cannot collide with the
# two-element [seed, epoch] keys used by the batch shuffler
_SEED_NET, _SEED_DROPOUT, _SEED_ZMAP, _SEED_SPLIT = range(4)


@dataclass
class MetricsRecord:
    epoch: int
    train_accuracy: float
    test_accuracy: float
    train_loss: float  # epoch mean of (data loss + penalty) over steps
    penalty_value: float  # epoch mean of the penalty component
    lr: float
    wall_time_ms: float  # training-phase time, excludes evaluation


@dataclass
class StepMetrics:
    data_loss: float
    penalty_value: float

    @property
    def total(self) -> float:
        return self.data_loss + self.penalty_value


def build_network(config: TrainConfig) -> Network:
    return init_network(
        config.sizes,
        dropout_rates=config.dropout_rates(),
        seed=[config.seed, 0, _SEED_NET],
    )


def build_dlreg_state(config: TrainConfig) -> DlRegState | None:
    if config.reg_kind != "dlreg":
        return None
    return init_dlreg_state(
        input_dim=config.sizes[0],
        class_count=config.sizes[-1],
        gamma=config.gamma,
        policy=config.policy,
        beta=config.beta,
        seed=[config.seed, 0, _SEED_ZMAP],
    )


def train_step(
    net: Network,
    x,
    targets,
    config: TrainConfig,
    optim_state: OptimizerState,
    lr: float,
    rng,
    dlreg_state: DlRegState | None = None,
) -> StepMetrics:
    """One labeled step: forward, combined gradients, update, map refresh.

    With the linear-fit regularizer active, the penalty is evaluated
    against the current (lagged) map and its output-gradient is added to
    the loss gradient before the single backward pass; after the parameter
    update the map is refit on this batch's outputs. A zero gamma skips
    the penalty entirely, leaving the step bitwise identical to an
    unregularized one.
    """
    cache = forward(net, x, mode="train", rng=rng)
    data_loss, grad_logits = softmax_cross_entropy(cache.logits, targets)

    penalty = 0.0
    dlreg_active = (
        config.reg_kind == "dlreg" and dlreg_state is not None and dlreg_state.gamma != 0.0
    )
    if dlreg_active:
        batch = augment_ones(x)
        if not dlreg_state.initialized:
            dlreg_update_z(batch, cache.logits, dlreg_state)
        penalty, grad_penalty = dlreg_penalty(batch, cache.logits, dlreg_state)
        grad_logits = grad_logits + grad_penalty

    grads = backward(net, cache, grad_logits)

    if config.reg_kind == "l2" and config.gamma != 0.0:
        penalty, l2_grads = l2_penalty(net, config.gamma)
        for k in range(len(net.layers)):
            grads.weights[k] += l2_grads.weights[k]

    sgd_step(net, grads, optim_state, lr)
    if config.weight_decay > 0.0:
        decoupled_weight_decay(net, config.weight_decay, lr)
    if dlreg_active:
        dlreg_update_z(batch, cache.logits, dlreg_state)

    return StepMetrics(data_loss=data_loss, penalty_value=penalty)


def semi_supervised_step(
    net: Network,
    x,
    config: TrainConfig,
    dlreg_state: DlRegState,
    optim_state: OptimizerState,
    lr: float,
    rng=None,
    update_z: bool = True,
) -> float:
    """One unlabeled step: the gradient comes from the penalty alone.

    Needs the linear-fit regularizer; with other configurations there is
    no label-free training signal. Returns the penalty value. ``update_z``
    can be switched off to hold the map fixed, e.g. when monitoring
    descent on a frozen objective.
    """
    if config.reg_kind != "dlreg":
        raise ConfigError("semi-supervised steps require reg.kind = dlreg")
    if dlreg_state.gamma == 0.0:
        return 0.0
    cache = forward(net, x, mode="train", rng=rng)
    batch = augment_ones(x)
    if not dlreg_state.initialized:
        dlreg_update_z(batch, cache.logits, dlreg_state)
    penalty, grad_logits = dlreg_penalty(batch, cache.logits, dlreg_state)
    grads = backward(net, cache, grad_logits)
    sgd_step(net, grads, optim_state, lr)
    if update_z:
        dlreg_update_z(batch, cache.logits, dlreg_state)
    return penalty


def evaluate(net: Network, dataset: Dataset, chunk_rows: int = 2048):
    """Eval-mode accuracy (percent) and mean cross-entropy over a dataset.

    Predictions are row argmaxes of the logits; ties resolve to the lowest
    class index.
    """
    if not dataset.labeled:
        raise StateError("evaluation needs a labeled dataset")
    m = dataset.sample_count
    correct = 0
    loss_sum = 0.0
    for start in range(0, m, chunk_rows):
        x = dataset.inputs[start : start + chunk_rows]
        y = dataset.targets[start : start + chunk_rows]
        logits = forward(net, x, mode="eval").logits
        loss, _ = softmax_cross_entropy(logits, y)
        loss_sum += loss * x.shape[0]
        correct += int(np.sum(np.argmax(logits, axis=1) == np.argmax(y, axis=1)))
    return 100.0 * correct / m, loss_sum / m


def _split_unlabeled(train: Dataset, fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Carve off a fraction of rows as an unlabeled pool (labels dropped)."""
    m = train.sample_count
    n_unlabeled = int(round(fraction * m))
    if n_unlabeled < 1 or m - n_unlabeled < 1:
        raise ConfigError(
            f"unlabeled_fraction {fraction} leaves no usable split of {m} rows"
        )
    order = np.random.default_rng([seed, 0, _SEED_SPLIT]).permutation(m)
    unlabeled_idx, labeled_idx = order[:n_unlabeled], order[n_unlabeled:]
    labeled = Dataset(
        inputs=train.inputs[labeled_idx],
        targets=train.targets[labeled_idx],
        class_count=train.class_count,
    )
    unlabeled = Dataset(
        inputs=train.inputs[unlabeled_idx], targets=None, class_count=train.class_count
    )
    return labeled, unlabeled


def load_datasets(config: TrainConfig) -> tuple[Dataset, Dataset]:
    """Load train/test sets from the config's paths, applying reduction."""
    for key, value in (
        ("data.images", config.images),
        ("data.labels", config.labels),
        ("data.test_images", config.test_images),
        ("data.test_labels", config.test_labels),
    ):
        if value is None:
            raise ConfigError(f"missing dataset path: {key}")
    train = load_idx(config.images, config.labels, scaling=config.scaling)
    test = load_idx(config.test_images, config.test_labels, scaling=config.scaling)
    if config.per_class is not None:
        train = reduce_dataset(train, config.per_class, seed=config.seed)
    return train, test


def run_experiment(
    config: TrainConfig,
    train_data: Dataset | None = None,
    test_data: Dataset | None = None,
    metrics_path=None,
) -> list[MetricsRecord]:
    """Full training run with per-epoch evaluation on train and test sets.

    Datasets load from the config's paths unless passed in directly. When
    ``metrics_path`` is given the CSV is rewritten after every epoch, so
    partial results survive an aborted run.
    """
    if train_data is None or test_data is None:
        train_data, test_data = load_datasets(config)
    if train_data.input_dim != config.sizes[0]:
        raise ConfigError(
            f"net.sizes starts at {config.sizes[0]} but data has "
            f"{train_data.input_dim} features"
        )

    unlabeled = None
    if config.unlabeled_fraction > 0.0:
        if config.reg_kind != "dlreg":
            raise ConfigError("train.unlabeled_fraction requires reg.kind = dlreg")
        train_data, unlabeled = _split_unlabeled(
            train_data, config.unlabeled_fraction, config.seed
        )

    net = build_network(config)
    dlreg_state = build_dlreg_state(config)
    optim_state = init_optimizer(net, momentum=config.momentum)
    sched = ExpSchedule(
        base_lr=config.lr, decay=config.decay, period_epochs=config.period
    )
    dropout_rng = np.random.default_rng([config.seed, 0, _SEED_DROPOUT])
    plan = BatchPlan(
        batch_size=min(config.batch_size, train_data.sample_count),
        shuffle_seed=config.seed,
        drop_last=config.drop_last,
    )
    unlabeled_plan = (
        BatchPlan(
            batch_size=min(config.batch_size, unlabeled.sample_count),
            shuffle_seed=config.seed,
        )
        if unlabeled is not None
        else None
    )

    records: list[MetricsRecord] = []
    try:
        for epoch in range(config.epochs):
            lr = lr_at(sched, epoch)
            started = time.perf_counter()
            data_loss_sum = 0.0
            penalty_sum = 0.0
            steps = 0
            unlabeled_iter = (
                iter(batches(unlabeled, unlabeled_plan, epoch))
                if unlabeled is not None
                else None
            )
            for x, y in batches(train_data, plan, epoch):
                step = train_step(
                    net, x, y, config, optim_state, lr, dropout_rng, dlreg_state
                )
                data_loss_sum += step.data_loss
                penalty_sum += step.penalty_value
                steps += 1
                if unlabeled_iter is not None:
                    ux = next(unlabeled_iter, (None, None))[0]
                    if ux is not None:
                        semi_supervised_step(
                            net, ux, config, dlreg_state, optim_state, lr, dropout_rng
                        )
            wall_ms = (time.perf_counter() - started) * 1000.0
            train_acc, _ = evaluate(net, train_data)
            test_acc, _ = evaluate(net, test_data)
            records.append(
                MetricsRecord(
                    epoch=epoch,
                    train_accuracy=train_acc,
                    test_accuracy=test_acc,
                    train_loss=(data_loss_sum + penalty_sum) / steps,
                    penalty_value=penalty_sum / steps,
                    lr=lr,
                    wall_time_ms=wall_ms,
                )
            )
            if metrics_path is not None:
                write_metrics(records, metrics_path)
    except Exception:
        if records and metrics_path is not None:
            write_metrics(records, metrics_path)
        raise
    return records


def format_real(value: float) -> str:
    return f"{value:.6g}"


def write_metrics(records, path) -> None:
    """Write records as CSV, reals at 6 significant digits; empty is an error."""
    if not records:
        raise StateError("refusing to write an empty metrics file")
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.epoch),
                    format_real(r.train_accuracy),
                    format_real(r.test_accuracy),
                    format_real(r.train_loss),
                    format_real(r.penalty_value),
                    format_real(r.lr),
                    format_real(r.wall_time_ms),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_plot_data(records, out_dir) -> None:
    """One two-column (epoch, value) file per series, for any plotting tool."""
    if not records:
        raise StateError("no records to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    columns = {
        "train_acc": [r.train_accuracy for r in records],
        "test_acc": [r.test_accuracy for r in records],
        "train_loss": [r.train_loss for r in records],
        "penalty": [r.penalty_value for r in records],
        "lr": [r.lr for r in records],
    }
    epochs = [r.epoch for r in records]
    for name in PLOT_SERIES:
        lines = [
            f"{epoch} {format_real(value)}"
            for epoch, value in zip(epochs, columns[name])
        ]
        (out / f"{name}.dat").write_text("\n".join(lines) + "\n", encoding="utf-8")
