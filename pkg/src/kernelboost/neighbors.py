"""Nearest-neighbour classifiers and SVM-KNN local learning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorVector, distance_rows
from .kernels import BaseKernel, gram_from_distances, kernel_value
from .svm import VOTE, predict_multiclass, train_multiclass


class NeighborError(ValueError):
    pass


@dataclass
class NeighborQueryStats:
    cheap_evals: int = 0
    costly_evals: int = 0
    svm_invocations: int = 0


def _values(x):
    return x.values if isinstance(x, DescriptorVector) else np.asarray(x, dtype=np.float64)


def _check_train(train_rows, train_labels, k):
    rows = np.atleast_2d(np.asarray(train_rows, dtype=np.float64))
    labels = np.asarray(train_labels)
    if labels.size == 0:
        raise NeighborError("empty training set")
    if rows.shape[0] != labels.size:
        raise NeighborError("training rows and labels differ in length")
    if not 1 <= k <= labels.size:
        raise NeighborError(f"k={k} outside 1..{labels.size}")
    return rows, labels


def rank(dists, candidates=None):
    """Candidate indices sorted by distance, ties to the lower index."""
    if candidates is None:
        candidates = np.arange(dists.size)
    order = np.lexsort((candidates, dists))
    return candidates[order]


def _majority(labels, nearest_first):
    votes = {}
    for lab in nearest_first:
        votes[lab] = votes.get(lab, 0) + 1
    best = max(votes.values())
    winners = [lab for lab, v in votes.items() if v == best]
    if len(winners) == 1:
        return winners[0]
    return nearest_first[0]


def knn_classify(query, train_rows, train_labels, k=1, kind="chi2"):
    """Majority label among the k nearest; a label tie falls back to 1-NN."""
    rows, labels = _check_train(train_rows, train_labels, k)
    d = distance_rows(_values(query), rows, kind)
    nearest = rank(d)[:k]
    stats = NeighborQueryStats(costly_evals=labels.size)
    return int(_majority(labels, [int(labels[i]) for i in nearest])), stats


def nn_classify(query, train_rows, train_labels, kind="chi2"):
    return knn_classify(query, train_rows, train_labels, 1, kind)


def local_svm_predict(query_dists, neighbor_rows, neighbor_labels, kind, gamma, c, strategy=VOTE):
    """Train a multiclass SVM on a neighbourhood and classify the query.

    ``query_dists`` holds the query's distances to the neighbourhood rows.
    Returns (label, number of pairwise distances evaluated).
    """
    k = len(neighbor_labels)
    pair = np.zeros((k, k))
    for i in range(k - 1):
        d = distance_rows(neighbor_rows[i], neighbor_rows[i + 1 :], kind)
        pair[i, i + 1 :] = d
        pair[i + 1 :, i] = d
    gram = gram_from_distances(pair, gamma)
    model = train_multiclass(gram, neighbor_labels, c, strategy)
    label = predict_multiclass(model, kernel_value(query_dists, gamma))
    return int(label), k * (k - 1) // 2


def _neighborhood_svm(query_dists, rows, labels, chosen, kernel, c, strategy, stats):
    # training-index order keeps the local problem independent of query ranking
    chosen = np.sort(chosen)
    local = labels[chosen]
    if np.all(local == local[0]):
        return int(local[0]), stats
    label, pair_evals = local_svm_predict(
        query_dists[chosen], rows[chosen], local, kernel.distance_kind, kernel.gamma, c, strategy
    )
    stats.costly_evals += pair_evals
    stats.svm_invocations += 1
    return label, stats


def svm_knn_naive(query, train_rows, train_labels, k, base_kernel: BaseKernel, c=10.0, strategy=VOTE):
    """SVM-KNN: label-pure neighbourhoods answer directly, others train a local SVM."""
    if k < 2:
        raise NeighborError("SVM-KNN needs k >= 2")
    rows, labels = _check_train(train_rows, train_labels, k)
    d = distance_rows(_values(query), rows, base_kernel.distance_kind)
    stats = NeighborQueryStats(costly_evals=labels.size)
    return _neighborhood_svm(d, rows, labels, rank(d)[:k], base_kernel, c, strategy, stats)


def svm_knn_two_stage(
    query,
    train_rows,
    train_labels,
    shortlist,
    k,
    cheap_kind,
    costly_kind,
    base_kernel: BaseKernel,
    c=10.0,
    strategy=VOTE,
):
    """Shortlist by a cheap distance, re-rank it by the costly one, then SVM-KNN."""
    if k < 2:
        raise NeighborError("SVM-KNN needs k >= 2")
    rows, labels = _check_train(train_rows, train_labels, k)
    if shortlist < k:
        raise NeighborError(f"shortlist {shortlist} smaller than k={k}")
    if shortlist > labels.size:
        raise NeighborError(f"shortlist {shortlist} exceeds {labels.size} training samples")
    if base_kernel.distance_kind != costly_kind:
        raise NeighborError("the base kernel must use the costly distance")
    q = _values(query)
    stats = NeighborQueryStats(cheap_evals=labels.size)
    cheap = distance_rows(q, rows, cheap_kind)
    short = rank(cheap)[:shortlist]
    costly = np.full(labels.size, np.nan)
    costly[short] = distance_rows(q, rows[short], costly_kind)
    stats.costly_evals = short.size
    chosen = rank(costly[short], short)[:k]
    return _neighborhood_svm(costly, rows, labels, chosen, base_kernel, c, strategy, stats)
