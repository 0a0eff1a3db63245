"""``kernelboost`` command line.

Exit status: 0 on success, 1 on a usage error (bad flags, unknown method),
2 when input data, a config file or a model file cannot be used.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .. import descriptors as desc
from ..imagecore import DatasetError, PgmError, ingest_directory, read_pgm
from ..kernels import KernelError
from ..svm import SvmError
from ..boosting import BoostingError
from .config import ConfigError, default_config, load_config
from .evaluation import crossval, emit_report, report_from_predictions
from .persistence import ModelFormatError, load_model, save_model
from .pipeline import METHODS, PipelineError, TrainedModel, extract_raw, fit_codebook, predict_images, train_on_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DATA_ERRORS = (
    OSError,
    PgmError,
    DatasetError,
    ConfigError,
    ModelFormatError,
    PipelineError,
    desc.DescriptorError,
    KernelError,
    SvmError,
    BoostingError,
    ValueError,  # remaining input validation, e.g. a class smaller than the fold count
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(path):
    return load_config(path) if path else default_config()


def _dataset(args, config):
    return ingest_directory(args.data, config.canonical_size)


def cmd_extract(args):
    config = _config(args.config)
    ds = _dataset(args, config)
    channels = [ch for ch in config.channels if ch != "siftbow"]
    codebook = None
    if "siftbow" in config.channels and args.codebook:
        codebook = load_model(args.codebook)
        if not isinstance(codebook, desc.Codebook):
            raise PipelineError(f"{args.codebook} does not hold a codebook")
        channels.append("siftbow")
    raw = extract_raw(ds.images, config, channels)
    records = []
    for i, name in enumerate(ds.names):
        for ch in channels:
            if ch == "siftbow":
                vec = desc.bow_histogram(raw.locals_[i], codebook)
            else:
                vec = desc.DescriptorVector(ch, raw.fixed[ch][i])
            records.append((name, vec))
    header = {"size": config.canonical_size, "channels": ",".join(channels)}
    desc.write_descriptor_cache(args.out, records, header)
    print(f"wrote {len(records)} descriptors for {len(ds)} images to {args.out}")


def cmd_codebook(args):
    config = _config(args.config)
    ds = _dataset(args, config)
    raw = extract_raw(ds.images, config, ("siftbow",))
    codebook, _ = fit_codebook(raw.locals_, config)
    save_model(args.out, codebook)
    print(f"codebook: {codebook.k} words, inertia {codebook.inertia:.6g}, written to {args.out}")


def cmd_train(args):
    config = _config(args.config)
    ds = _dataset(args, config)
    model = train_on_dataset(args.method, config, ds)
    save_model(args.model, model)
    print(f"trained {args.method} on {len(ds)} images ({len(ds.classes)} classes), saved to {args.model}")


def _trained(path):
    model = load_model(path)
    if not isinstance(model, TrainedModel):
        raise PipelineError(f"{path} does not hold a trained classifier")
    return model


def cmd_predict(args):
    model = _trained(args.model)
    images = [read_pgm(p) for p in args.image]
    preds, _ = predict_images(model, images)
    for path, p in zip(args.image, preds):
        print(f"{path}\t{model.classes[int(p)]}")


def cmd_eval(args):
    model = _trained(args.model)
    ds = ingest_directory(args.data, model.config.canonical_size)
    unknown = [c for c in ds.classes if c not in model.classes]
    if unknown:
        raise DatasetError(f"classes not seen in training: {', '.join(unknown)}")
    true = np.array([model.classes.index(ds.classes[l]) for l in ds.labels], dtype=np.intp)
    preds, stats = predict_images(model, ds.images)
    report = report_from_predictions(model.method, model.classes, ds.names, true, preds, stats)
    emit_report(report, args.out, timing=args.timing)
    print(f"{model.method} accuracy {report.accuracy:.6f} on {report.total} images")


def cmd_crossval(args):
    config = _config(args.config)
    ds = _dataset(args, config)
    methods = args.method or list(METHODS)
    reports = crossval(ds, config, methods, args.folds, args.seed)
    emit_report(reports, args.out, timing=args.timing)
    for rep in reports:
        print(f"{rep.method}\t{rep.accuracy:.6f}")


def build_parser():
    p = _Parser(prog="kernelboost", description="Multi-descriptor kernel classifiers for PGM image trees.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="cache per-image descriptors")
    s.add_argument("--data", required=True, help="dataset root with one directory per class")
    s.add_argument("--config")
    s.add_argument("--codebook", help="codebook file; enables the siftbow channel")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("codebook", help="build a visual-word codebook")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_codebook)

    s = sub.add_parser("train", help="train one method on a whole dataset")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="classify PGM images")
    s.add_argument("--model", required=True)
    s.add_argument("--image", required=True, nargs="+")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="score a trained model on a labelled tree")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--timing", action="store_true", help="record wall time instead of '-'")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("crossval", help="stratified k-fold comparison of methods")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--folds", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--method", action="append", choices=METHODS, help="repeatable; default all")
    s.add_argument("--timing", action="store_true", help="record wall time instead of '-'")
    s.set_defaults(func=cmd_crossval)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "folds", None) is not None and args.folds < 2:
            raise UsageError("kernelboost crossval: --folds must be >= 2")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
