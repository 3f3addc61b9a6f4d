"""Command-line entry point.

Subcommands:

* ``train``     fit a model, write checkpoint.json and train_log.csv
* ``eval``      evaluate a checkpoint: similarity.csv, metrics.csv, robustness.csv
* ``gradcheck`` run the gradient / oracle verification suites
* ``report``    re-emit a similarity CSV as heatmap data, optionally a PNG

Exit codes: 0 success, 1 usage error, 2 data or format error,
3 verification failure.  Settings come from an INI-style config file
(key = value lines under sections) overridden by flags; flags win.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from . import data as data_mod
from . import evaluate as eval_mod
from . import train as train_mod
from . import verify
from .data import DataError, IdxFormatError
from .train import TrainConfig, TrainingError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        raise UsageError(message)


CONFIG_KEYS = {
    "dataset": str,
    "seed": int,
    "alpha": float,
    "layers": int,
    "epochs": int,
    "schedule": str,
    "triplets_per_epoch": int,
    "learning_rate": float,
    "epsilon": float,
    "out": str,
    "mnist_images": str,
    "mnist_labels": str,
}


def _read_config(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DataError(f"config file not found: {path}")
    merged = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r} in [{section}]")
            merged[key] = CONFIG_KEYS[key](raw)
    return merged


def build_parser() -> _Parser:
    parser = _Parser(prog="qaml", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, help="INI config file; flags override it")
        p.add_argument("--seed", type=int, help="run seed (default 0)")
        p.add_argument("--alpha", type=float, help="margin strength (default 1.0)")
        p.add_argument("--layers", type=int, help="ansatz layers (default 4)")
        p.add_argument("--epochs", type=int, help="training iterations (default 1000)")
        p.add_argument("--schedule", choices=["natural", "alternating"])
        p.add_argument("--triplets-per-epoch", type=int, dest="triplets_per_epoch")
        p.add_argument("--learning-rate", type=float, dest="learning_rate")
        p.add_argument("--dataset", choices=["iris", "mnist"])
        p.add_argument("--mnist-images", type=Path, dest="mnist_images")
        p.add_argument("--mnist-labels", type=Path, dest="mnist_labels")
        p.add_argument("--epsilon", type=float, help="robustness threshold (default 0.02)")
        p.add_argument("--out", type=Path, help="output directory (default .)")

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p_eval.add_argument("checkpoint", type=Path)
    add_common(p_eval)

    p_grad = sub.add_parser("gradcheck", help="run the verification suites")
    p_grad.add_argument("--quick", action="store_true", help="smaller case counts")

    p_rep = sub.add_parser("report", help="render a similarity CSV")
    p_rep.add_argument("similarity", type=Path)
    p_rep.add_argument("--image", type=Path, help="also render a heatmap image")
    p_rep.add_argument("--out", type=Path, help="output directory (default .)")
    return parser


DEFAULTS = {
    "dataset": "iris",
    "seed": 0,
    "alpha": 1.0,
    "layers": 4,
    "epochs": 1000,
    "schedule": "natural",
    "triplets_per_epoch": 4,
    "learning_rate": 0.01,
    "epsilon": 0.02,
    "out": ".",
    "mnist_images": None,
    "mnist_labels": None,
}


def _settings(args) -> dict:
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _load_dataset(settings, seed) -> data_mod.DatasetSplit:
    if settings["dataset"] == "iris":
        raw = data_mod.load_iris(seed=seed)
        return data_mod.preprocess(raw)
    if not settings["mnist_images"] or not settings["mnist_labels"]:
        raise DataError("mnist dataset needs --mnist-images and --mnist-labels")
    raw = data_mod.load_mnist_idx(
        settings["mnist_images"], settings["mnist_labels"], seed=seed
    )
    return data_mod.preprocess(raw, pca_components=2)


def _cmd_train(args) -> int:
    settings = _settings(args)
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    split = _load_dataset(settings, settings["seed"])
    cfg = TrainConfig(
        epochs=settings["epochs"],
        triplets_per_epoch=settings["triplets_per_epoch"],
        layers=settings["layers"],
        schedule=settings["schedule"],
        seed=settings["seed"],
        alpha=settings["alpha"],
        learning_rate=settings["learning_rate"],
    )
    result = train_mod.train(cfg, split)
    train_mod.save_checkpoint(out / "checkpoint.json", result)
    eval_mod.write_train_log_csv(out / "train_log.csv", result.log)
    final_loss = result.log[-1].loss if result.log else float("nan")
    print(f"trained {cfg.epochs} epochs ({cfg.schedule}); final loss {final_loss:.6f}")
    print(f"wrote {out / 'checkpoint.json'} and {out / 'train_log.csv'}")
    return EXIT_OK


def _sorted_test(split):
    return sorted(split.test, key=lambda s: (repr(s.label),))


def _cmd_eval(args) -> int:
    settings = _settings(args)
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    if not args.checkpoint.exists():
        raise DataError(f"checkpoint not found: {args.checkpoint}")
    ckpt = train_mod.load_checkpoint(args.checkpoint)
    split = _load_dataset(settings, ckpt.config.seed)
    test = _sorted_test(split)
    matrix = eval_mod.similarity_matrix(test, ckpt.params)
    before = eval_mod.similarity_matrix(test, ckpt.initial_params)
    d_before = eval_mod.average_inner_products(before)
    d_after = eval_mod.average_inner_products(matrix)
    robustness = eval_mod.epsilon_robust_accuracy(matrix, settings["epsilon"])
    eval_mod.write_similarity_csv(out / "similarity.csv", matrix)
    eval_mod.write_metrics_csv(out / "metrics.csv", d_before, d_after)
    eval_mod.write_robustness_csv(out / "robustness.csv", robustness, matrix.labels)
    print(f"d_i/d_o before: {d_before[0]:+.4f} / {d_before[1]:+.4f}")
    print(f"d_i/d_o after:  {d_after[0]:+.4f} / {d_after[1]:+.4f}")
    print(
        f"epsilon-robust accuracy at {robustness.epsilon}: {robustness.accuracy:.2%}"
    )
    print(f"wrote similarity.csv, metrics.csv, robustness.csv in {out}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    results = verify.run_all(quick=args.quick)
    for result in results:
        print(result.summary())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_report(args) -> int:
    if not args.similarity.exists():
        raise DataError(f"similarity CSV not found: {args.similarity}")
    matrix = eval_mod.read_similarity_csv(args.similarity)
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    heatmap = out / "heatmap.csv"
    eval_mod.write_similarity_csv(heatmap, matrix)
    print(f"wrote {heatmap}")
    if args.image:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError as exc:
            raise DataError("image rendering needs matplotlib installed") from exc
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(matrix.values, vmin=-1, vmax=1, cmap="RdBu_r")
        ax.set_xlabel("sample")
        ax.set_ylabel("sample")
        fig.colorbar(im, ax=ax, label="inner product")
        fig.tight_layout()
        fig.savefig(args.image, dpi=150)
        plt.close(fig)
        print(f"wrote {args.image}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
        if args.command == "report":
            return _cmd_report(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IdxFormatError, TrainingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
