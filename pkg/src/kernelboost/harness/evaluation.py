"""Stratified folds, per-method evaluation, cross-validation and CSV reports."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from ..neighbors import NeighborQueryStats
from ..rng import Lcg64
from .pipeline import METHODS, PipelineError, extract_raw, method_channels, predict_rows, prepare_fold, train_method


@dataclass
class QueryRecord:
    name: str
    true: int
    predicted: int
    stats: NeighborQueryStats


@dataclass
class EvaluationReport:
    method: str
    classes: list
    confusion: np.ndarray
    queries: list = field(default_factory=list)
    wall_time: float = 0.0
    # training-side artefacts of a single evaluation, kept for inspection
    model: object = field(default=None, repr=False, compare=False)
    fold: object = field(default=None, repr=False, compare=False)

    @property
    def total(self):
        return int(self.confusion.sum())

    @property
    def accuracy(self):
        return int(np.trace(self.confusion)) / self.total

    def merge(self, other):
        if other.method != self.method or other.classes != self.classes:
            raise ValueError("can only merge reports of the same method and classes")
        return EvaluationReport(
            self.method,
            self.classes,
            self.confusion + other.confusion,
            self.queries + other.queries,
            self.wall_time + other.wall_time,
        )


def stratified_kfold(labels, folds, seed=0):
    """Per class: shuffle with the seeded LCG, deal round-robin into folds.

    Returns a list of (train indices, test indices), both sorted.
    """
    labels = np.asarray(labels, dtype=np.intp)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    rng = Lcg64(seed)
    assignment = np.empty(labels.size, dtype=np.intp)
    for c in np.unique(labels):
        members = [int(i) for i in np.flatnonzero(labels == c)]
        if len(members) < folds:
            raise ValueError(f"class {c} has {len(members)} samples, fewer than {folds} folds")
        rng.shuffle(members)
        for pos, i in enumerate(members):
            assignment[i] = pos % folds
    everything = np.arange(labels.size)
    return [
        (everything[assignment != f], everything[assignment == f]) for f in range(folds)
    ]


def confusion_matrix(true, pred, n_classes):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true, dtype=np.intp), np.asarray(pred, dtype=np.intp)), 1)
    return cm


def report_from_predictions(method, classes, names, true, pred, stats, wall_time=0.0):
    queries = [QueryRecord(n, int(t), int(p), s) for n, t, p, s in zip(names, true, pred, stats)]
    return EvaluationReport(method, list(classes), confusion_matrix(true, pred, len(classes)), queries, wall_time)


def evaluate(method, config, dataset, train_idx, test_idx, raw=None, fold=None) -> EvaluationReport:
    """Train ``method`` on ``train_idx`` and score it on ``test_idx``.

    Codebooks and kernel widths only ever see training samples. ``raw`` and
    ``fold`` let callers share extracted features between methods.
    """
    if method not in METHODS:
        raise PipelineError(f"unknown method {method!r}")
    train_idx = np.asarray(train_idx, dtype=np.intp)
    test_idx = np.asarray(test_idx, dtype=np.intp)
    if test_idx.size == 0:
        raise PipelineError("empty test split")
    channels = method_channels(method, config)
    start = time.perf_counter()
    if raw is None:
        raw = extract_raw(dataset.images, config, channels)
    if fold is None:
        fold = prepare_fold(raw, train_idx, config, channels)
    labels = np.asarray(dataset.labels, dtype=np.intp)
    model = train_method(
        method,
        config,
        dataset.classes,
        {ch: fold.rows[ch][train_idx] for ch in channels},
        labels[train_idx],
        fold.codebook,
    )
    pred, stats = predict_rows(model, {ch: fold.rows[ch][test_idx] for ch in channels})
    elapsed = time.perf_counter() - start
    names = [dataset.names[i] for i in test_idx]
    report = report_from_predictions(method, dataset.classes, names, labels[test_idx], pred, stats, elapsed)
    report.model, report.fold = model, fold
    return report


def crossval(dataset, config, methods=METHODS, folds=None, seed=None):
    """Stratified k-fold cross-validation; one merged report per method."""
    dataset.check_trainable()
    folds = config.folds if folds is None else folds
    seed = config.seed if seed is None else seed
    channels = sorted({ch for m in methods for ch in method_channels(m, config)})
    raw = extract_raw(dataset.images, config, channels)
    merged = {}
    for train_idx, test_idx in stratified_kfold(dataset.labels, folds, seed):
        fold = prepare_fold(raw, train_idx, config, channels)
        for m in methods:
            rep = evaluate(m, config, dataset, train_idx, test_idx, raw=raw, fold=fold)
            merged[m] = merged[m].merge(rep) if m in merged else rep
    return [merged[m] for m in methods]


def _report_rows(report, timing=True):
    rows = [list(report.classes)]
    rows += [[str(int(v)) for v in row] for row in report.confusion]
    rows.append(["method", "accuracy", "wall_time"])
    rows.append([report.method, f"{report.accuracy:.6f}", f"{report.wall_time:.3f}" if timing else "-"])
    rows.append(["query", "true", "predicted", "cheap_evals", "costly_evals", "svm_invocations"])
    for q in report.queries:
        rows.append(
            [
                q.name,
                report.classes[q.true],
                report.classes[q.predicted],
                str(q.stats.cheap_evals),
                str(q.stats.costly_evals),
                str(q.stats.svm_invocations),
            ]
        )
    return rows


def format_reports(reports, timing=True):
    """CSV text; several reports are separated by a blank line."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for i, rep in enumerate(reports):
        if rep.total == 0:
            raise ValueError("refusing to emit a report with no evaluated queries")
        if i:
            writer.writerow([])
        writer.writerows(_report_rows(rep, timing))
    return buf.getvalue()


def emit_report(report, path, timing=True):
    """Write a report CSV: class header, confusion rows (true x predicted),
    ``method,accuracy,wall_time`` summary, then per-query statistics.
    """
    reports = report if isinstance(report, (list, tuple)) else [report]
    text = format_reports(reports, timing)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_report_csv(path):
    """Parse the confusion blocks of a report CSV.

    Returns a list of dicts with keys classes, confusion, method, accuracy.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    i = 0
    while i < len(rows):
        if not rows[i]:
            i += 1
            continue
        classes = rows[i]
        n = len(classes)
        confusion = np.array([[int(v) for v in r] for r in rows[i + 1 : i + 1 + n]], dtype=np.int64)
        summary = rows[i + 2 + n]
        out.append(
            {
                "classes": classes,
                "confusion": confusion,
                "method": summary[0],
                "accuracy": summary[1],
                "wall_time": summary[2],
            }
        )
        i += 3 + n
        while i < len(rows) and rows[i]:
            i += 1
    return out
