"""Command-line entry point: ``sesemi train|eval|gradcheck|demo``.

Exit codes: 0 success, 1 usage or config error, 2 data or format error,
3 numerical failure (including a failed gradient check).
"""

import argparse
import contextlib
import logging
import os
import sys

from . import checkpoint
from .config import DATASETS, load_config
from .datasets import load_cifar10, load_points_csv
from .exceptions import (
    ConfigError,
    DimensionError,
    FormatError,
    NumericalError,
    ParameterError,
    StateError,
)
from .experiments import demo_config, preprocess_images, run_experiment
from .gradcheck import GRADCHECK_SPECS, run_gradcheck
from .training import test_error

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("sesemi")


def _thread_limit():
    n = os.environ.get("SESEMI_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        limit = int(n)
    except ValueError:
        raise ConfigError(f"SESEMI_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=limit)


def run_train(config_path):
    cfg = load_config(config_path)
    _, metrics, paths = run_experiment(cfg)
    final = metrics.epochs[-1][1] if metrics.epochs else float("nan")
    print(f"trained {len(metrics.steps)} steps; final test error {final:.4f}")
    for key in sorted(paths):
        print(f"  {key}: {paths[key]}")
    return EXIT_OK


def evaluate(ckpt_path, dataset, path):
    """Error rate of a saved model on the test split named by ``dataset`` and ``path``."""
    model, zca, prep = checkpoint.load(ckpt_path)
    if dataset == "cifar10":
        _, test = load_cifar10(path)
        inputs = test.inputs
        if prep.get("gcn"):
            inputs = preprocess_images(inputs, zca if prep.get("zca") else None, model.spec.dtype)
        test = type(test)(inputs, test.targets, test.num_classes)
    else:
        test = load_points_csv(path, model.spec.num_classes)
    if tuple(test.inputs.shape[1:]) != tuple(model.spec.input_shape):
        raise DimensionError(
            f"checkpoint expects inputs of shape {tuple(model.spec.input_shape)}, "
            f"but {path} holds {tuple(test.inputs.shape[1:])}"
        )
    if test.targets.size and test.targets.max() >= model.spec.num_classes:
        raise DimensionError(
            f"{path} has label {int(test.targets.max())} but the model has {model.spec.num_classes} classes"
        )
    model.eval()
    return test_error(model, test)


def run_eval(ckpt_path, dataset, path):
    print(f"{evaluate(ckpt_path, dataset, path):.4f}")
    return EXIT_OK


def run_gradcheck_cmd(spec_name, seed):
    report = run_gradcheck(spec_name, seed)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_NUMERIC


def run_demo(dataset, mode, seed, out):
    cfg = demo_config(dataset, mode=mode, seed=seed, out=out)
    _, metrics, paths = run_experiment(cfg)
    print(f"{dataset} {mode} seed {seed}: test error {metrics.epochs[-1][1]:.4f}")
    for key in sorted(paths):
        print(f"  {key}: {paths[key]}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sesemi", description="Supervised training with a self-supervised auxiliary task.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from a key = value config file")
    p.add_argument("config")

    p = sub.add_parser("eval", help="print the test error rate of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("dataset", choices=DATASETS)
    p.add_argument("path", help="points CSV for synthetic data, batch directory for cifar10")

    p = sub.add_parser("gradcheck", help="finite-difference check of a tiny model")
    p.add_argument("spec", choices=sorted(GRADCHECK_SPECS))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("demo", help="run a 2-D demo and export its decision grid")
    p.add_argument("dataset", choices=("two_moons", "three_spirals"))
    p.add_argument("--mode", choices=("supervised", "asl", "ssl"), default="ssl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            if args.command == "train":
                return run_train(args.config)
            if args.command == "eval":
                return run_eval(args.checkpoint, args.dataset, args.path)
            if args.command == "gradcheck":
                return run_gradcheck_cmd(args.spec, args.seed)
            out = args.out or os.path.join("runs", f"demo-{args.dataset}-{args.mode}-{args.seed}")
            return run_demo(args.dataset, args.mode, args.seed, out)
    except (ConfigError, ParameterError) as exc:
        print(f"sesemi: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, DimensionError, StateError) as exc:
        print(f"sesemi: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"sesemi: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"sesemi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
