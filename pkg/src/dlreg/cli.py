"""Command-line harness.

Verbs:
  train    run one experiment from a config file, write metrics + plot data
  compare  run the four benchmark arms (L2, Dropout+L2, linear-fit,
           Dropout+linear-fit) and emit a summary table
  check    run the built-in invariant and gradient self-checks

Exit codes: 0 success, 1 configuration error, 2 runtime/numerical error,
3 io error (missing or malformed data files).
"""

import argparse
import sys
from pathlib import Path

from .checks import run_self_checks
from .config import GAMMA_DEFAULTS, load_config, replace_config
from .errors import ConfigError, DlregError, IdxFormatError
from .experiments import emit_plot_data, load_datasets, run_experiment, write_metrics

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

# the four benchmark arms: (directory name, regularizer kind, dropout flag)
COMPARE_ARMS = (
    ("l2", "l2", False),
    ("dropout_l2", "l2", True),
    ("dlreg", "dlreg", False),
    ("dropout_dlreg", "dlreg", True),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dlreg",
        description="Train and benchmark dense networks with the linear-fit, "
        "L2, and dropout regularizers.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out", default="out", help="output directory")

    common(sub.add_parser("train", help="run one configured experiment"))
    common(sub.add_parser("compare", help="run the four regularizer arms"))
    check = sub.add_parser("check", help="run the built-in self-checks")
    check.add_argument("--out", default=None, help="optional report file")
    return parser


def _load(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace_config(config, seed=args.seed)
    return config


def cmd_train(args) -> int:
    config = _load(args)
    out = Path(args.out)
    records = run_experiment(config, metrics_path=out / "metrics.csv")
    emit_plot_data(records, out / "plots")
    final = records[-1]
    print(
        f"done: {config.epochs} epochs, final train {final.train_accuracy:.2f}%, "
        f"test {final.test_accuracy:.2f}%"
    )
    print(f"metrics: {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = _load(args)
    out = Path(args.out)
    # arms pin their own regularizer settings (per-kind default factors);
    # the base config supplies network, optimizer, and data choices
    train_data, test_data = load_datasets(base)
    results = []
    for name, kind, dropout in COMPARE_ARMS:
        config = replace_config(
            base,
            reg_kind=kind,
            gamma=GAMMA_DEFAULTS[kind],
            dropout=dropout,
        )
        records = run_experiment(
            config,
            train_data=train_data,
            test_data=test_data,
            metrics_path=out / name / "metrics.csv",
        )
        emit_plot_data(records, out / name / "plots")
        results.append((name, records[-1].test_accuracy))
        print(f"{name}: final test {records[-1].test_accuracy:.2f}%", flush=True)

    width = max(len(name) for name, _ in results)
    table = ["", f"{'method'.ljust(width)}  test accuracy"]
    for name, acc in results:
        table.append(f"{name.ljust(width)}  {acc:.2f}")
    print("\n".join(table))
    summary = out / "summary.csv"
    summary.write_text(
        "method,test_acc\n"
        + "\n".join(f"{name},{acc:.6g}" for name, acc in results)
        + "\n",
        encoding="utf-8",
    )
    print(f"\nsummary: {summary}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_self_checks()
    lines = []
    for name, passed, detail in results:
        status = "ok" if passed else "FAIL"
        lines.append(f"{status:4s} {name}: {detail}")
        print(lines[-1], flush=True)
    failed = [name for name, passed, _ in results if not passed]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_RUNTIME
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "compare": cmd_compare, "check": cmd_check}
    try:
        return handlers[args.verb](args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (IdxFormatError, OSError) as err:
        print(f"io error: {err}", file=sys.stderr)
        return EXIT_IO
    except (DlregError, ArithmeticError, ValueError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
