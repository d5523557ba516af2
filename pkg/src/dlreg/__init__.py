"""dlreg: dense-network training with a linear-regression regularizer.

The penalty charges a network for straying from the best linear map
between its (ones-augmented) inputs and its outputs; the map itself is
refit in closed form after every parameter update. L2, decoupled weight
decay, and inverted dropout are included as baselines, along with an
IDX data pipeline, an SGD training loop, and a benchmark CLI.
"""

from .config import TrainConfig, load_config, parse_config, replace_config
from .data import (
    BatchPlan,
    Dataset,
    batches,
    load_idx,
    reduce_dataset,
    synthetic_glyphs,
    synthetic_linear,
    write_glyph_corpus,
    write_idx,
)
from .experiments import (
    MetricsRecord,
    emit_plot_data,
    evaluate,
    run_experiment,
    semi_supervised_step,
    train_step,
    write_metrics,
)
from .linalg import frobenius_sq, lstsq, matmul, solve_spd
from .nn import (
    DenseLayer,
    ForwardCache,
    Gradients,
    Network,
    backward,
    forward,
    init_network,
    softmax_cross_entropy,
)
from .optim import ExpSchedule, OptimizerState, init_optimizer, lr_at, sgd_step
from .regularizers import (
    AugmentedBatch,
    DlRegState,
    augment_ones,
    decoupled_weight_decay,
    dlreg_penalty,
    dlreg_update_z,
    init_dlreg_state,
    l2_penalty,
)

__version__ = "0.1.0"
