"""Flat key = value experiment configuration with dotted keys.

Lines look like ``optim.lr = 0.1``; ``#`` starts a comment. Unknown keys
are rejected, every key has a default, and the defaults reproduce the
benchmark's standard hyperparameters (lr 0.1 decayed by 0.96 every 30
epochs, momentum 0.9, batch 256, cross-entropy loss, L2 factor 5e-4,
linear-fit factor 1e-12).
"""

from dataclasses import dataclass, fields

from .errors import ConfigError

REG_KINDS = ("none", "l2", "dlreg")
POLICIES = ("ema", "closed_form_lagged")
SCALINGS = ("unit", "raw")

# gamma defaults depend on the regularizer kind
GAMMA_DEFAULTS = {"none": 0.0, "l2": 5e-4, "dlreg": 1e-12}


@dataclass
class TrainConfig:
    # network
    sizes: list[int]
    dropout: bool = False
    dropout_input: float = 0.2
    dropout_hidden: float = 0.5
    # regularizer
    reg_kind: str = "none"
    gamma: float | None = None  # resolved per kind when left unset
    policy: str = "ema"
    beta: float = 0.1
    weight_decay: float = 0.0  # decoupled multiplicative decay, 0 disables
    # optimizer
    lr: float = 0.1
    momentum: float = 0.9
    decay: float = 0.96
    period: int = 30
    # training loop
    batch_size: int = 256
    epochs: int = 60
    seed: int = 0
    drop_last: bool = False
    unlabeled_fraction: float = 0.0
    # data
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    per_class: int | None = None
    scaling: str = "unit"

    def __post_init__(self):
        self.sizes = [int(s) for s in self.sizes]
        if self.reg_kind not in REG_KINDS:
            raise ConfigError(f"reg.kind must be one of {REG_KINDS}, got {self.reg_kind!r}")
        if self.gamma is None:
            self.gamma = GAMMA_DEFAULTS[self.reg_kind]
        if self.gamma < 0:
            raise ConfigError(f"reg.gamma must be >= 0, got {self.gamma}")
        if self.policy not in POLICIES:
            raise ConfigError(f"reg.policy must be one of {POLICIES}, got {self.policy!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"reg.beta must be in (0, 1], got {self.beta}")
        if self.weight_decay < 0:
            raise ConfigError(f"reg.weight_decay must be >= 0, got {self.weight_decay}")
        if self.scaling not in SCALINGS:
            raise ConfigError(f"data.scaling must be one of {SCALINGS}, got {self.scaling!r}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.unlabeled_fraction < 1.0:
            raise ConfigError(
                f"train.unlabeled_fraction must be in [0, 1), got {self.unlabeled_fraction}"
            )
        if self.per_class is not None and self.per_class < 1:
            raise ConfigError(f"data.per_class must be >= 1, got {self.per_class}")

    def dropout_rates(self) -> list[float]:
        """Per-layer input dropout: the configured input rate on the first
        layer and the hidden rate everywhere else; zeros when disabled."""
        n_layers = len(self.sizes) - 1
        if not self.dropout:
            return [0.0] * n_layers
        return [self.dropout_input] + [self.dropout_hidden] * (n_layers - 1)


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(raw)


def _parse_int_list(raw: str) -> list[int]:
    return [int(part.strip()) for part in raw.split(",") if part.strip()]


# key -> (config attribute, parser)
KEY_TABLE = {
    "net.sizes": ("sizes", _parse_int_list),
    "net.dropout": ("dropout", _parse_bool),
    "net.dropout_input": ("dropout_input", float),
    "net.dropout_hidden": ("dropout_hidden", float),
    "reg.kind": ("reg_kind", str),
    "reg.gamma": ("gamma", float),
    "reg.policy": ("policy", str),
    "reg.beta": ("beta", float),
    "reg.weight_decay": ("weight_decay", float),
    "optim.lr": ("lr", float),
    "optim.momentum": ("momentum", float),
    "optim.decay": ("decay", float),
    "optim.period": ("period", int),
    "train.batch_size": ("batch_size", int),
    "train.epochs": ("epochs", int),
    "train.seed": ("seed", int),
    "train.drop_last": ("drop_last", _parse_bool),
    "train.unlabeled_fraction": ("unlabeled_fraction", float),
    "data.images": ("images", str),
    "data.labels": ("labels", str),
    "data.test_images": ("test_images", str),
    "data.test_labels": ("test_labels", str),
    "data.per_class": ("per_class", int),
    "data.scaling": ("scaling", str),
}

DEFAULT_SIZES = [784, 1024, 1024, 2048, 10]


def parse_config(text: str) -> TrainConfig:
    """Parse key = value lines into a TrainConfig; unknown keys are errors."""
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser = KEY_TABLE[key]
        if attr in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[attr] = parser(raw_value)
        except (ValueError, TypeError):
            raise ConfigError(
                f"line {lineno}: bad value {raw_value!r} for {key}"
            ) from None
    values.setdefault("sizes", list(DEFAULT_SIZES))
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def replace_config(config: TrainConfig, **overrides) -> TrainConfig:
    """New TrainConfig with some fields replaced (validation re-runs).

    ``gamma`` was already resolved for the original kind, so pass it
    explicitly when changing ``reg_kind``.
    """
    current = {f.name: getattr(config, f.name) for f in fields(TrainConfig)}
    current.update(overrides)
    current["sizes"] = list(current["sizes"])
    return TrainConfig(**current)
