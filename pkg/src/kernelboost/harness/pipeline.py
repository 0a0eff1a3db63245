"""Feature extraction and the six trainable classification methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import descriptors as desc
from ..boosting import BoostedEnsemble, WeakLearnerSpec, adaboost_train, boosted_predict
from ..imagecore import Dataset, resize_bilinear
from ..kernels import BaseKernel, default_gamma, gram_from_distances, kernel_value, upper_distances
from ..neighbors import NeighborQueryStats, knn_classify, svm_knn_naive, svm_knn_two_stage
from ..rng import Lcg64
from ..svm import MulticlassSvmModel, predict_multiclass_batch, train_multiclass

METHODS = ("NN", "KNN", "SVM", "SVMKNN", "SVMKNN2", "ADABOOST")


class PipelineError(ValueError):
    pass


def method_channels(method, config):
    if method in ("NN", "KNN"):
        return (config.knn_channel,)
    if method == "SVM":
        return (config.svm_kernel,)
    if method in ("SVMKNN", "SVMKNN2"):
        return (config.svmknn_channel,)
    if method == "ADABOOST":
        return tuple(config.boost_pool)
    raise PipelineError(f"unknown method {method!r}")


@dataclass
class RawFeatures:
    """Codebook-independent per-image features.

    ``fixed`` maps channel -> (n, dim) rows; ``locals_`` holds each image's
    SIFT-lite descriptors when the siftbow channel is requested.
    """

    fixed: dict
    locals_: list | None = None

    def __len__(self):
        if self.locals_ is not None:
            return len(self.locals_)
        return next(iter(self.fixed.values())).shape[0]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        fixed = {ch: rows[idx] for ch, rows in self.fixed.items()}
        locals_ = [self.locals_[i] for i in idx] if self.locals_ is not None else None
        return RawFeatures(fixed, locals_)


def _canonical(img, size):
    if (img.width, img.height) != (size, size):
        img = resize_bilinear(img, size, size)
    return img


def extract_raw(images, config, channels=None) -> RawFeatures:
    channels = tuple(channels or config.channels)
    fixed = {ch: [] for ch in channels if ch != "siftbow"}
    locals_ = [] if "siftbow" in channels else None
    for img in images:
        img = _canonical(img, config.canonical_size)
        if "phog" in fixed:
            fixed["phog"].append(desc.phog(img, config.phog).values)
        if "tiny" in fixed:
            fixed["tiny"].append(desc.tiny_image(img, config.tiny).values)
        if locals_ is not None:
            locs = desc.dense_sift_lite(img, config.siftbow)
            locals_.append(np.array(locs).reshape(-1, desc.SIFT_LENGTH))
    fixed = {ch: np.vstack(rows) for ch, rows in fixed.items()}
    return RawFeatures(fixed, locals_)


def fit_codebook(train_locals, config):
    """Build the codebook from (a seeded sample of) training-set locals only.

    Returns (codebook, indices of the images whose locals were used).
    """
    owners = np.concatenate(
        [np.full(len(l), i, dtype=np.intp) for i, l in enumerate(train_locals)]
    )
    pts = np.vstack([l for l in train_locals if len(l)]) if owners.size else np.empty((0, desc.SIFT_LENGTH))
    limit = config.codebook_samples
    if limit and pts.shape[0] > limit:
        order = np.arange(pts.shape[0])
        rng = Lcg64(config.siftbow.seed)
        # partial Fisher-Yates: the first `limit` slots form the sample
        for i in range(limit):
            j = i + rng.randbelow(order.size - i)
            order[i], order[j] = order[j], order[i]
        keep = np.sort(order[:limit])
        pts, owners = pts[keep], owners[keep]
    cb = desc.build_codebook(pts, config.siftbow.words, config.siftbow.seed)
    return cb, np.unique(owners)


def encode(raw: RawFeatures, codebook, channels):
    rows = {}
    for ch in channels:
        if ch == "siftbow":
            if codebook is None:
                raise PipelineError("siftbow channel needs a codebook")
            rows[ch] = np.vstack([desc.bow_histogram(l, codebook).values for l in raw.locals_])
        else:
            rows[ch] = raw.fixed[ch]
    return rows


@dataclass
class FoldFeatures:
    """Encoded rows of every sample for one train split."""

    rows: dict
    codebook: desc.Codebook | None
    codebook_sources: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))


def prepare_fold(raw: RawFeatures, train_idx, config, channels) -> FoldFeatures:
    codebook, sources = None, np.empty(0, dtype=np.intp)
    if "siftbow" in channels:
        train_idx = np.asarray(train_idx, dtype=np.intp)
        codebook, owners = fit_codebook([raw.locals_[i] for i in train_idx], config)
        sources = train_idx[owners]
    return FoldFeatures(encode(raw, codebook, channels), codebook, sources)


@dataclass
class TrainedModel:
    method: str
    config: object
    classes: list
    train_rows: dict
    train_labels: np.ndarray
    kernels: dict
    jitters: dict
    classifier: MulticlassSvmModel | BoostedEnsemble | None = None
    codebook: desc.Codebook | None = None
    gamma_sources: int = 0


def _channel_kernel(ch, rows, kind, gamma, need_gram):
    """BaseKernel (gamma from training pairs unless fixed) and optional Gram."""
    dist = desc.pairwise_distances(rows, kind) if (gamma is None or need_gram) else None
    if gamma is None:
        gamma = default_gamma(upper_distances(dist))
    bk = BaseKernel(ch, ch, kind, gamma)
    gram = gram_from_distances(dist, gamma, ch) if need_gram else None
    return bk, gram


def train_method(method, config, classes, train_rows, train_labels, codebook=None) -> TrainedModel:
    """Fit ``method`` on encoded training rows (channel -> matrix)."""
    if method not in METHODS:
        raise PipelineError(f"unknown method {method!r}")
    labels = np.asarray(train_labels, dtype=np.intp)
    if len(classes) < 2 or np.unique(labels).size < 2:
        raise PipelineError("training needs at least 2 classes with samples")
    channels = method_channels(method, config)
    rows = {ch: np.asarray(train_rows[ch]) for ch in channels}
    model = TrainedModel(method, config, list(classes), rows, labels, {}, {})
    model.gamma_sources = labels.size
    if "siftbow" in channels:
        model.codebook = codebook

    if method in ("NN", "KNN"):
        pass
    elif method == "SVM":
        ch = config.svm_kernel
        bk, gram = _channel_kernel(ch, rows[ch], config.distance[ch], config.gamma[ch], True)
        model.kernels[ch], model.jitters[ch] = bk, gram.jitter
        model.classifier = train_multiclass(gram, labels, config.svm_c, config.svm_strategy, config.svm_tol)
    elif method in ("SVMKNN", "SVMKNN2"):
        ch = config.svmknn_channel
        bk, _ = _channel_kernel(ch, rows[ch], config.svmknn_costly, config.gamma[ch], False)
        model.kernels[ch] = bk
    else:
        grams = {}
        for ch in channels:
            bk, gram = _channel_kernel(ch, rows[ch], config.distance[ch], config.gamma[ch], True)
            model.kernels[ch], model.jitters[ch], grams[ch] = bk, gram.jitter, gram
        pool = [WeakLearnerSpec(ch, config.boost_c) for ch in channels]
        model.classifier = adaboost_train(
            labels,
            grams,
            pool,
            config.boost_rounds,
            n_classes=len(classes),
            strategy=config.svm_strategy,
            tol=config.svm_tol,
        )
    return model


def _kernel_rows(bk, query_rows, train_rows):
    out = np.empty((query_rows.shape[0], train_rows.shape[0]))
    for q in range(query_rows.shape[0]):
        out[q] = kernel_value(desc.distance_rows(query_rows[q], train_rows, bk.distance_kind), bk.gamma)
    return out


def predict_rows(model: TrainedModel, query_rows):
    """Predict class indices for encoded query rows; returns (labels, stats)."""
    cfg = model.config
    m = next(iter(query_rows.values())).shape[0]
    stats = [NeighborQueryStats() for _ in range(m)]
    method = model.method
    if method in ("NN", "KNN"):
        ch = cfg.knn_channel
        k = 1 if method == "NN" else cfg.knn_k
        preds = np.empty(m, dtype=np.intp)
        for q in range(m):
            preds[q], stats[q] = knn_classify(
                query_rows[ch][q], model.train_rows[ch], model.train_labels, k, cfg.knn_distance
            )
        return preds, stats
    if method == "SVM":
        ch = cfg.svm_kernel
        rows = _kernel_rows(model.kernels[ch], query_rows[ch], model.train_rows[ch])
        return predict_multiclass_batch(model.classifier, rows).astype(np.intp), stats
    if method in ("SVMKNN", "SVMKNN2"):
        ch = cfg.svmknn_channel
        bk = model.kernels[ch]
        train = model.train_rows[ch]
        preds = np.empty(m, dtype=np.intp)
        for q in range(m):
            if method == "SVMKNN":
                preds[q], stats[q] = svm_knn_naive(
                    query_rows[ch][q], train, model.train_labels, cfg.svmknn_k, bk, cfg.svm_c, cfg.svmknn_strategy
                )
            else:
                preds[q], stats[q] = svm_knn_two_stage(
                    query_rows[ch][q],
                    train,
                    model.train_labels,
                    min(cfg.svmknn_shortlist, train.shape[0]),
                    cfg.svmknn_k,
                    cfg.svmknn_cheap,
                    cfg.svmknn_costly,
                    bk,
                    cfg.svm_c,
                    cfg.svmknn_strategy,
                )
        return preds, stats
    per_kernel = {
        ch: _kernel_rows(model.kernels[ch], query_rows[ch], model.train_rows[ch])
        for ch in model.classifier.kernel_ids
    }
    return np.asarray(boosted_predict(model.classifier, per_kernel), dtype=np.intp).reshape(m), stats


def predict_images(model: TrainedModel, images):
    channels = method_channels(model.method, model.config)
    raw = extract_raw(images, model.config, channels)
    rows = encode(raw, model.codebook, channels)
    return predict_rows(model, rows)


def train_on_dataset(method, config, dataset: Dataset) -> TrainedModel:
    dataset.check_trainable()
    channels = method_channels(method, config)
    raw = extract_raw(dataset.images, config, channels)
    fold = prepare_fold(raw, np.arange(len(dataset)), config, channels)
    return train_method(method, config, dataset.classes, fold.rows, dataset.labels, fold.codebook)
