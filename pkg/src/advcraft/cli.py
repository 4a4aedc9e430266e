"""Command-line front end.

Subcommands: train, attack, transform, evaluate, report.  Exit codes:
0 success, 1 usage or configuration error, 2 data or parse error,
3 numeric or stalled-attack error.  Output files are written atomically.
"""

from __future__ import annotations

import argparse
import io
import os
import sys

import numpy as np

from . import __version__
from .attack import ATTACKS, AttackConfig, write_trace_csv
from .config import Settings, build_run_config, load_config, parse_methods
from .datasets import load_cifar10, load_image_dir, load_mnist
from .errors import (
    ConfigError,
    IntegrityError,
    NumericError,
    ParseError,
    StalledAttackError,
    UndefinedMetricError,
    UnsupportedVersionError,
)
from .evaluate import format_report_table, read_report_rows, run_experiment, write_report_rows
from .nn import architecture, init_network
from .perception import perceptual_distance, sensitivity_map
from .pnm import read_image, write_image
from .training import TrainConfig, train
from .transforms import TransformSpec, parse_transform
from .weights_io import load_weights, save_weights

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _load_dataset(images: str, labels: str | None, fmt: str):
    if fmt == "mnist":
        if not labels:
            raise ConfigError("mnist format needs --labels")
        return load_mnist(images, labels)
    if fmt == "cifar10":
        return load_cifar10(images.split(","))
    if fmt == "directory":
        return load_image_dir(images)
    raise ConfigError(f"unknown dataset format '{fmt}'")


# --------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    settings = Settings(load_config(args.config) if args.config else None)
    images = settings.resolve(args.images, "dataset", "images", str, None)
    labels = settings.resolve(args.labels, "dataset", "labels", str, None)
    fmt = settings.resolve(args.format, "dataset", "format", str, "mnist")
    arch = settings.resolve(args.arch, "model", "arch", str, "mnist-small")
    out = settings.resolve(args.out, "model", "path", str, None)
    cfg = TrainConfig(
        epochs=settings.resolve(args.epochs, "train", "epochs", int, 5),
        batch_size=settings.resolve(args.batch_size, "train", "batch_size", int, 32),
        learning_rate=settings.resolve(args.learning_rate, "train", "learning_rate", float, 0.05),
        seed=settings.resolve(args.seed, "train", "seed", int, 0),
        label_smoothing=settings.resolve(
            args.label_smoothing, "train", "label_smoothing", float, 0.0
        ),
    )
    if not images or not out:
        raise ConfigError("train needs --images and --out (or config equivalents)")

    data = _load_dataset(images, labels, fmt)
    limit = settings.resolve(args.limit, "train", "limit", int, None)
    train_images, train_labels = data.images, data.labels
    if limit is not None:
        train_images, train_labels = train_images[:limit], train_labels[:limit]

    input_shape, layers = architecture(arch)
    if input_shape != data.image_shape:
        raise ConfigError(
            f"architecture '{arch}' expects input {input_shape}, dataset has {data.image_shape}"
        )
    net = init_network(input_shape, layers, seed=cfg.seed)
    net = train(net, train_images, train_labels, cfg, log=print)
    save_weights(net, out)
    print(f"saved weights to {out}")

    from .training import accuracy

    if args.test_images:
        test = _load_dataset(args.test_images, args.test_labels, fmt)
        print(f"test accuracy {accuracy(net, test.images, test.labels):.4f}")
    else:
        print(f"train accuracy {accuracy(net, train_images, train_labels):.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# attack


def _single_image(args):
    if args.image:
        return read_image(args.image)
    if args.images:
        data = _load_dataset(args.images, args.labels, args.format or "mnist")
        if not 0 <= args.index < data.count:
            raise ConfigError(f"--index {args.index} out of range for {data.count} samples")
        return data.images[args.index]
    raise ConfigError("attack needs --image or --images/--index")


def cmd_attack(args) -> int:
    settings = Settings(load_config(args.config) if args.config else None)
    net = load_weights(args.model)
    image = _single_image(args)
    target = settings.resolve(args.target, "attack", "target", int, None)
    if target is None:
        raise ConfigError("attack needs --target")
    method = settings.resolve(args.method, "attack", "method", str, "greedy")
    if method not in ATTACKS:
        raise ConfigError(f"unknown attack method '{method}' (want one of {sorted(ATTACKS)})")
    cfg = AttackConfig(
        target=target,
        smoothing=settings.resolve(args.smoothing, "attack", "smoothing", float, 100.0),
        pixels_per_step=settings.resolve(args.pixels, "attack", "pixels_per_step", int, 20),
        step=settings.resolve(args.step, "attack", "step", float, 0.01),
        distance_budget=settings.resolve(args.budget, "attack", "distance_budget", float, 70.0),
        mode=settings.resolve(args.mode, "attack", "mode", str, "minimal"),
        max_iters=settings.resolve(args.max_iters, "attack", "max_iters", int, 5000),
    )
    sen = sensitivity_map(image)
    if method == "greedy":
        result = ATTACKS["greedy"](net, image, cfg, sen=sen)
    elif method == "fgsm":
        alpha = settings.resolve(args.alpha, "attack", "alpha", float, 0.001)
        result = ATTACKS["fgsm"](
            net, image, target, alpha=alpha, max_iters=cfg.max_iters,
            distance_budget=cfg.distance_budget, sen=sen, mode=cfg.mode,
            smoothing=cfg.smoothing,
        )
    else:
        theta = settings.resolve(args.theta, "attack", "theta", float, 1.0)
        result = ATTACKS["jsma"](
            net, image, target, theta=theta, distance_budget=cfg.distance_budget,
            sen=sen, mode=cfg.mode, max_iters=cfg.max_iters, smoothing=cfg.smoothing,
        )

    if args.out:
        write_image(args.out, result.image)
    if args.trace:
        buffer = io.StringIO()
        write_trace_csv(result.trace, buffer)
        _atomic_write_text(args.trace, buffer.getvalue())
    print(f"success {int(result.success)}")
    print(f"predicted {result.predicted}")
    print(f"gap {result.gap!r}")
    print(f"distance {result.distance!r}")
    print(f"iterations {result.iterations}")
    return EXIT_OK


# --------------------------------------------------------------------------
# transform


def cmd_transform(args) -> int:
    if args.spec:
        spec = parse_transform(args.spec)
    else:
        if not args.kind:
            raise ConfigError("transform needs --kind or --spec")
        spec = TransformSpec(
            kind=args.kind,
            std=args.std if args.std is not None else 0.0,
            sigma=args.sigma if args.sigma is not None else 1.0,
            radius=args.radius if args.radius is not None else 3,
            quality=args.quality if args.quality is not None else 60,
            factor=args.factor if args.factor is not None else 1.0,
            offset=args.offset if args.offset is not None else 0.0,
        )
    image = read_image(args.input)
    write_image(args.output, spec.apply(image, seed=args.seed))
    print(f"wrote {args.output} ({spec.label})")
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate / report


def cmd_evaluate(args) -> int:
    settings = Settings(load_config(args.config) if args.config else None)
    run = build_run_config(settings, args)
    fmt = settings.resolve(args.format, "dataset", "format", str, "mnist")
    net = load_weights(run.model)
    data = _load_dataset(run.images, run.labels, fmt)
    count = run.count if run.count is not None else data.count
    images, labels = data.images[:count], data.labels[:count]

    reports = []
    for method in run.methods:
        report = run_experiment(
            net, images, labels, method, run.attack, run.grid,
            master_seed=run.seed, jobs=run.jobs, alpha=run.alpha, theta=run.theta,
        )
        reports.append(report)
        print(
            f"{method}: success {report.success_rate:.3f} "
            f"({len(report.qualifying)}/{report.sample_count} qualify)"
        )

    buffer = io.StringIO()
    write_report_rows(reports, buffer)
    out = args.out or os.path.join(run.output_dir, "report.csv")
    _atomic_write_text(out, buffer.getvalue())
    print(f"wrote {out}")
    print(format_report_table(read_report_rows(io.StringIO(buffer.getvalue()))))
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.report, newline="") as handle:
        rows = read_report_rows(handle)
    print(format_report_table(rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_dataset_flags(sub):
    sub.add_argument("--images", help="image file (IDX/CIFAR bin) or directory")
    sub.add_argument("--labels", help="label file (IDX), when the format needs one")
    sub.add_argument("--format", choices=["mnist", "cifar10", "directory"])
    sub.add_argument("--config", help="INI config file; flags override its values")


def _add_attack_flags(sub):
    sub.add_argument("--smoothing", type=float, help="log-sum-exp sharpness k")
    sub.add_argument("--pixels", type=int, help="pixels moved per iteration")
    sub.add_argument("--step", type=float, help="per-pixel step magnitude")
    sub.add_argument("--budget", type=float, help="perceptual distance budget")
    sub.add_argument("--mode", choices=["minimal", "minimal-stop", "budget", "robust-budget"])
    sub.add_argument("--max-iters", type=int)
    sub.add_argument("--alpha", type=float, help="fgsm per-iteration step")
    sub.add_argument("--theta", type=float, help="jsma per-pixel change")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advcraft",
        description="Craft and evaluate perceptually-budgeted adversarial examples.",
    )
    parser.add_argument("--version", action="version", version=f"advcraft {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("train", help="train a classifier, save weights")
    _add_dataset_flags(sub)
    sub.add_argument("--arch", help="architecture preset name")
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--learning-rate", type=float)
    sub.add_argument("--label-smoothing", type=float,
                     help="spread this much target mass uniformly over classes")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--limit", type=int, help="train on the first N samples only")
    sub.add_argument("--out", help="weight file to write")
    sub.add_argument("--test-images", help="held-out images for the accuracy line")
    sub.add_argument("--test-labels")
    sub.set_defaults(func=cmd_train)

    sub = commands.add_parser("attack", help="craft one adversarial image")
    _add_dataset_flags(sub)
    sub.add_argument("--model", required=True, help="weight file")
    sub.add_argument("--image", help="input image (P5/P6)")
    sub.add_argument("--index", type=int, default=0, help="sample index into --images")
    sub.add_argument("--target", type=int, help="target class")
    sub.add_argument("--method", choices=sorted(ATTACKS))
    _add_attack_flags(sub)
    sub.add_argument("--out", help="adversarial image to write (P5/P6)")
    sub.add_argument("--trace", help="per-iteration trace CSV to write")
    sub.set_defaults(func=cmd_attack)

    sub = commands.add_parser("transform", help="apply one transform to an image")
    sub.add_argument("--spec", help="transform spec, e.g. noise:0.1 or jpeg:60")
    sub.add_argument("--kind", choices=["identity", "noise", "blur", "jpeg", "contrast", "brightness"])
    sub.add_argument("--std", type=float, help="noise standard deviation")
    sub.add_argument("--sigma", type=float, help="blur sigma")
    sub.add_argument("--radius", type=int, help="blur kernel radius")
    sub.add_argument("--quality", type=int, help="jpeg quality 1..100")
    sub.add_argument("--factor", type=float, help="contrast factor")
    sub.add_argument("--offset", type=float, help="brightness offset")
    sub.add_argument("--seed", type=int, default=0, help="noise seed")
    sub.add_argument("input", help="input image (P5/P6)")
    sub.add_argument("output", help="output image")
    sub.set_defaults(func=cmd_transform)

    sub = commands.add_parser("evaluate", help="run the attack-vs-transform grid")
    _add_dataset_flags(sub)
    sub.add_argument("--model", help="weight file")
    sub.add_argument("--methods", help="comma-separated: greedy,fgsm,jsma")
    sub.add_argument("--grid", help="semicolon-separated transforms, e.g. 'noise:0.1;jpeg:60'")
    sub.add_argument("--count", type=int, help="evaluate the first N samples")
    sub.add_argument("--seed", type=int, help="experiment master seed")
    sub.add_argument("--jobs", type=int, help="parallel sample workers")
    _add_attack_flags(sub)
    sub.add_argument("--output-dir")
    sub.add_argument("--out", help="report CSV path (default <output-dir>/report.csv)")
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("report", help="pretty-print a report CSV")
    sub.add_argument("report", help="report CSV file")
    sub.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, IntegrityError, UnsupportedVersionError, UndefinedMetricError,
            FileNotFoundError, IsADirectoryError, PermissionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, StalledAttackError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
