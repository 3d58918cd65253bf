"""Command-line entry point: ``labelnoise <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import data, metrics, noise_model
from ..estimation import estimate_transition
from ..losses import LossSpec
from ..nn import TrainConfig, build, load_model, save_model, train
from .config import ARCHS, DEFAULT_DATASET, METHOD_LOSS, METHODS, ExperimentConfig
from .experiment import ExperimentResult, run_experiment, write_outputs

log = logging.getLogger("labelnoise")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _add_train_flags(p):
    p.add_argument("--architecture", choices=ARCHS, default="small_cnn")
    p.add_argument("--filters", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated conv filter counts, e.g. 32,64,128")
    p.add_argument("--hidden", type=int, help="dense hidden units")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30, help="maximum epochs")
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labelnoise",
                     description="Label-noise robust training on synthetic or stored image data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic clean dataset")
    p.add_argument("--classes", type=int, default=DEFAULT_DATASET["n_classes"])
    p.add_argument("--per-class", type=int, default=DEFAULT_DATASET["samples_per_class"])
    p.add_argument("--shape", type=lambda s: tuple(int(v) for v in s.split(",")),
                   default=tuple(DEFAULT_DATASET["image_shape"]), help="H,W,C")
    p.add_argument("--contrast", type=float, default=DEFAULT_DATASET["template_contrast"])
    p.add_argument("--sigma", type=float, default=DEFAULT_DATASET["pixel_noise_sigma"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("inject", help="corrupt a dataset's labels with a transition matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--t", required=True,
                   help="fashion05, fashion06, identity, symmetric:<rho> or a CSV file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: <data>.noisy.nlds)")

    p = sub.add_parser("estimate-t", help="estimate the transition matrix of a noisy dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--truth", help="true matrix to score against")
    p.add_argument("--out", help="write the estimate as CSV")
    _add_train_flags(p)
    p.set_defaults(epochs=20)

    p = sub.add_parser("train", help="train one method with one seed")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=METHODS, default="ce_baseline")
    p.add_argument("--t", help="transition matrix for reweighted/backward")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="per-epoch loss CSV path")
    _add_train_flags(p)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")

    p = sub.add_parser("experiment", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="output directory (default: next to the config)")

    p = sub.add_parser("report", help="render a result.json")
    p.add_argument("--result", required=True)
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    return parser


def _print_matrix(m):
    for row in np.asarray(m):
        print(" ".join(f"{v:.8f}" for v in row))


def cmd_generate(args):
    spec = data.SyntheticSpec(args.classes, args.per_class, args.shape, args.contrast, args.sigma)
    ds = data.generate_synthetic(spec, args.seed, Path(args.out).stem)
    data.save(ds, args.out)
    print(f"wrote {len(ds)} samples ({spec.n_classes} classes) to {args.out}")


def cmd_inject(args):
    ds = data.load(args.data)
    T = noise_model.resolve(args.t, ds.n_classes)
    noisy, rec = noise_model.inject_noise(ds.labels, T, args.seed)
    out = args.out or str(Path(args.data).with_suffix(".noisy.nlds"))
    data.save(ds.with_labels(noisy, "noisy"), out)
    print(f"flipped {rec.n_flipped} of {len(ds)} labels ({rec.n_flipped / len(ds):.4f})")
    print("label histogram:", " ".join(str(int(v)) for v in np.bincount(noisy, minlength=ds.n_classes)))
    print("empirical transition matrix:")
    _print_matrix(rec.empirical_matrix)
    print(f"wrote {out}")


def _train_config(args, loss_kind):
    return TrainConfig(batch_size=args.batch_size, max_epochs=args.epochs, patience=args.patience,
                       seed=args.seed, val_fraction=args.val_fraction, loss_kind=loss_kind,
                       learning_rate=args.lr)


def _fit(args, ds, loss, monitor=None):
    parts = data.split(ds, 1.0 - args.val_fraction, args.seed)
    model = build(args.architecture, ds.image_shape, ds.n_classes, args.seed,
                  filters=args.filters, hidden=args.hidden)
    return train(model, parts.train, parts.val, loss, _train_config(args, loss.kind), monitor)


def cmd_estimate(args):
    ds = data.load(args.data)
    truth = noise_model.resolve(args.truth, ds.n_classes) if args.truth else None
    model, _ = _fit(args, ds, LossSpec("cross_entropy"))
    report = estimate_transition(model, ds.images, ds.labels, ds.n_classes, truth=truth)
    _print_matrix(report.estimated.entries)
    if report.mse_vs_truth is not None:
        print(f"MSE: {report.mse_vs_truth!r}")
    print(report.summary())
    if args.out:
        report.estimated.to_csv(args.out)


def cmd_train(args):
    ds = data.load(args.data)
    kind = METHOD_LOSS[args.method]
    T = None
    if kind != "cross_entropy":
        if not args.t:
            raise UsageError(f"--method {args.method} needs --t")
        T = noise_model.resolve(args.t, ds.n_classes)
    monitor = LossSpec("backward", T=T) if T is not None else None
    model, history = _fit(args, ds, LossSpec(kind, T=T), monitor)
    save_model(model, args.out)
    if args.history:
        Path(args.history).write_text(history.to_csv())
    print(f"trained {len(history)} epochs (best {history.best_epoch}); wrote {args.out}")


def cmd_evaluate(args):
    model = load_model(args.model)
    ds = data.load(args.data)
    cm = metrics.confusion(ds.labels, model.predict(ds.images), ds.n_classes)
    report = metrics.compute_metrics(cm)
    if args.format == "csv":
        sys.stdout.write(metrics.report_csv({Path(args.model).stem: report}))
    elif args.format == "json":
        print(json.dumps({**report.as_dict(), "undefined_classes": report.undefined_classes,
                          "confusion": cm.counts.tolist()}))
    else:
        sys.stdout.write(metrics.report_markdown(report))


def cmd_experiment(args):
    config = ExperimentConfig.from_json(args.config)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.config).resolve().parent
    result = run_experiment(config, out_dir)
    sys.stdout.write(result.to_markdown())
    print(f"wrote {out_dir / 'result.json'}, result.csv, result.md")


def cmd_report(args):
    result = ExperimentResult.from_dict(json.loads(Path(args.result).read_text()))
    sys.stdout.write(result.to_csv() if args.format == "csv" else result.to_markdown())


COMMANDS = {
    "generate": cmd_generate,
    "inject": cmd_inject,
    "estimate-t": cmd_estimate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"labelnoise {args.command}: {exc}\n")
        return 1
    except Exception as exc:
        sys.stderr.write(f"labelnoise {args.command}: error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
