"""Versioned line-oriented model files.

The first line is ``kernelboost-model v1``; every following line is
``<field> <value...>``. Reals are written with ``repr`` (shortest round-trip
decimal) so a load reproduces each float bit for bit. Strings that may hold
spaces (class names, config values) are JSON-encoded.
"""

from __future__ import annotations

import json

import numpy as np

from ..boosting import BoostedEnsemble, BoostRound
from ..descriptors import Codebook
from ..kernels import BaseKernel
from ..svm import BinarySvmModel, MulticlassSvmModel
from .config import ExperimentConfig
from .pipeline import TrainedModel

MAGIC = "kernelboost-model"
VERSION = "v1"


class ModelFormatError(ValueError):
    pass


class VersionError(ModelFormatError):
    pass


class SchemaError(ModelFormatError):
    def __init__(self, message, field):
        super().__init__(message)
        self.field = field


def _reals(values):
    return " ".join(repr(float(v)) for v in values)


def _ints(values):
    return " ".join(str(int(v)) for v in values)


class _Writer:
    def __init__(self):
        self.lines = [f"{MAGIC} {VERSION}"]

    def put(self, field, value=""):
        self.lines.append(f"{field} {value}".rstrip())

    def text(self):
        return "\n".join(self.lines) + "\n"


class _Reader:
    def __init__(self, text):
        self.lines = text.splitlines()
        if not self.lines:
            raise SchemaError("missing field 'magic': empty model file", "magic")
        head = self.lines[0].split()
        if len(head) != 2 or head[0] != MAGIC:
            raise SchemaError(f"field 'magic': expected '{MAGIC} {VERSION}'", "magic")
        if head[1] != VERSION:
            raise VersionError(f"field 'version': unsupported model version {head[1]!r}, expected {VERSION}")
        self.pos = 1

    def get(self, field):
        if self.pos >= len(self.lines):
            raise SchemaError(f"missing field {field!r} (file truncated at line {self.pos + 1})", field)
        line = self.lines[self.pos]
        name, _, rest = line.partition(" ")
        if name != field:
            raise SchemaError(f"line {self.pos + 1}: expected field {field!r}, found {name!r}", field)
        self.pos += 1
        return rest

    def get_int(self, field):
        try:
            return int(self.get(field))
        except ValueError:
            raise SchemaError(f"field {field!r}: expected an integer", field) from None

    def get_real(self, field):
        try:
            return float(self.get(field))
        except ValueError:
            raise SchemaError(f"field {field!r}: expected a real", field) from None

    def get_reals(self, field, count=None):
        raw = self.get(field)
        try:
            vals = np.array([float(v) for v in raw.split()], dtype=np.float64)
        except ValueError:
            raise SchemaError(f"field {field!r}: expected reals", field) from None
        if count is not None and vals.size != count:
            raise SchemaError(f"field {field!r}: expected {count} values, found {vals.size}", field)
        return vals

    def get_ints(self, field, count=None):
        raw = self.get(field)
        try:
            vals = np.array([int(v) for v in raw.split()], dtype=np.intp)
        except ValueError:
            raise SchemaError(f"field {field!r}: expected integers", field) from None
        if count is not None and vals.size != count:
            raise SchemaError(f"field {field!r}: expected {count} values, found {vals.size}", field)
        return vals

    def get_json(self, field):
        try:
            return json.loads(self.get(field))
        except json.JSONDecodeError:
            raise SchemaError(f"field {field!r}: malformed JSON", field) from None


# -- writers ---------------------------------------------------------------


def _put_binary(w, m: BinarySvmModel):
    w.put("svm.n_support", m.n_support)
    w.put("svm.bias", repr(float(m.bias)))
    w.put("svm.c", repr(float(m.c)))
    w.put("svm.tol", repr(float(m.tol)))
    w.put("svm.indices", _ints(m.indices))
    w.put("svm.coef", _reals(m.coef))


def _put_multiclass(w, m: MulticlassSvmModel):
    w.put("multiclass.classes", _ints(m.classes))
    w.put("multiclass.strategy", m.strategy)
    w.put("multiclass.pairs", len(m.pairwise))
    for (a, b), bm in m.pairwise.items():
        w.put("pair", f"{a} {b}")
        _put_binary(w, bm)


def _put_ensemble(w, e: BoostedEnsemble):
    w.put("ensemble.classes", _ints(e.classes))
    w.put("ensemble.rounds", len(e.rounds))
    for r in e.rounds:
        w.put("round.kernel_id", r.kernel_id)
        w.put("round.alpha", repr(float(r.alpha)))
        w.put("round.error", repr(float(r.error)))
        _put_multiclass(w, r.model)


def _put_codebook(w, cb: Codebook):
    w.put("codebook.k", cb.k)
    w.put("codebook.dim", cb.words.shape[1])
    w.put("codebook.seed", cb.seed)
    w.put("codebook.inertia", repr(float(cb.inertia)))
    for row in cb.words:
        w.put("codebook.word", _reals(row))


def _put_trained(w, m: TrainedModel):
    w.put("model.method", m.method)
    w.put("model.classes", json.dumps(list(m.classes)))
    w.put("config.entries", len(m.config.flat))
    for key, value in m.config.flat:
        w.put("config.entry", json.dumps([key, value]))
    w.put("train.n", m.train_labels.size)
    w.put("train.labels", _ints(m.train_labels))
    w.put("train.channels", len(m.train_rows))
    for ch, rows in m.train_rows.items():
        w.put("channel.name", ch)
        w.put("channel.dim", rows.shape[1])
        bk = m.kernels.get(ch)
        w.put("channel.kernel", "yes" if bk is not None else "no")
        if bk is not None:
            w.put("channel.distance", bk.distance_kind)
            w.put("channel.gamma", repr(float(bk.gamma)))
            w.put("channel.jitter", repr(float(m.jitters.get(ch, 0.0))))
        for row in rows:
            w.put("channel.row", _reals(row))
    w.put("codebook.present", "yes" if m.codebook is not None else "no")
    if m.codebook is not None:
        _put_codebook(w, m.codebook)
    if isinstance(m.classifier, BoostedEnsemble):
        w.put("classifier.kind", "ensemble")
        _put_ensemble(w, m.classifier)
    elif isinstance(m.classifier, MulticlassSvmModel):
        w.put("classifier.kind", "multiclass-svm")
        _put_multiclass(w, m.classifier)
    else:
        w.put("classifier.kind", "none")


_KINDS = (
    (TrainedModel, "trained", _put_trained),
    (BoostedEnsemble, "ensemble", _put_ensemble),
    (MulticlassSvmModel, "multiclass-svm", _put_multiclass),
    (BinarySvmModel, "binary-svm", _put_binary),
    (Codebook, "codebook", _put_codebook),
)


def dumps_model(model) -> str:
    for cls, kind, put in _KINDS:
        if isinstance(model, cls):
            w = _Writer()
            w.put("kind", kind)
            put(w, model)
            w.put("end")
            return w.text()
    raise TypeError(f"cannot serialize {type(model).__name__}")


def save_model(path, model):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


# -- readers ---------------------------------------------------------------


def _get_binary(r):
    n = r.get_int("svm.n_support")
    bias = r.get_real("svm.bias")
    c = r.get_real("svm.c")
    tol = r.get_real("svm.tol")
    indices = r.get_ints("svm.indices", n)
    coef = r.get_reals("svm.coef", n)
    return BinarySvmModel(indices, coef, bias, c, tol)


def _get_multiclass(r):
    classes = [int(c) for c in r.get_ints("multiclass.classes")]
    strategy = r.get("multiclass.strategy")
    pairs = r.get_int("multiclass.pairs")
    pairwise = {}
    for _ in range(pairs):
        a, b = (int(x) for x in r.get_ints("pair", 2))
        pairwise[(a, b)] = _get_binary(r)
    return MulticlassSvmModel(classes, pairwise, strategy)


def _get_ensemble(r):
    classes = [int(c) for c in r.get_ints("ensemble.classes")]
    count = r.get_int("ensemble.rounds")
    rounds = []
    for _ in range(count):
        kernel_id = r.get("round.kernel_id")
        alpha = r.get_real("round.alpha")
        error = r.get_real("round.error")
        rounds.append(BoostRound(_get_multiclass(r), alpha, kernel_id, error))
    return BoostedEnsemble(classes, rounds)


def _get_codebook(r):
    k = r.get_int("codebook.k")
    dim = r.get_int("codebook.dim")
    seed = r.get_int("codebook.seed")
    inertia = r.get_real("codebook.inertia")
    words = np.vstack([r.get_reals("codebook.word", dim) for _ in range(k)]) if k else np.empty((0, dim))
    return Codebook(words, seed, inertia)


def _get_trained(r):
    method = r.get("model.method")
    classes = r.get_json("model.classes")
    entries = r.get_int("config.entries")
    flat = dict(tuple(r.get_json("config.entry")) for _ in range(entries))
    config = ExperimentConfig.from_flat(flat)
    n = r.get_int("train.n")
    labels = r.get_ints("train.labels", n)
    rows, kernels, jitters = {}, {}, {}
    for _ in range(r.get_int("train.channels")):
        ch = r.get("channel.name")
        dim = r.get_int("channel.dim")
        if r.get("channel.kernel") == "yes":
            kind = r.get("channel.distance")
            gamma = r.get_real("channel.gamma")
            jitters[ch] = r.get_real("channel.jitter")
            kernels[ch] = BaseKernel(ch, ch, kind, gamma)
        rows[ch] = np.vstack([r.get_reals("channel.row", dim) for _ in range(n)]) if n else np.empty((0, dim))
    codebook = _get_codebook(r) if r.get("codebook.present") == "yes" else None
    kind = r.get("classifier.kind")
    if kind == "ensemble":
        classifier = _get_ensemble(r)
    elif kind == "multiclass-svm":
        classifier = _get_multiclass(r)
    elif kind == "none":
        classifier = None
    else:
        raise SchemaError(f"field 'classifier.kind': unknown kind {kind!r}", "classifier.kind")
    model = TrainedModel(method, config, classes, rows, labels, kernels, jitters, classifier, codebook)
    model.gamma_sources = n
    return model


_READERS = {
    "trained": _get_trained,
    "ensemble": _get_ensemble,
    "multiclass-svm": _get_multiclass,
    "binary-svm": _get_binary,
    "codebook": _get_codebook,
}


def loads_model(text):
    r = _Reader(text)
    kind = r.get("kind")
    if kind not in _READERS:
        raise SchemaError(f"field 'kind': unknown model kind {kind!r}", "kind")
    try:
        model = _READERS[kind](r)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise SchemaError(f"invalid model content: {exc}", "model") from exc
    r.get("end")
    return model


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
