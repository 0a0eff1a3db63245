"""Multiclass AdaBoost (SAMME) whose weak learners are per-kernel multiclass SVMs.

Each round retrains one SVM per base kernel with per-sample costs
``C_i = C * n * w_i`` and keeps the one with the lowest weighted error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .svm import DEFAULT_TOL, VOTE, MulticlassSvmModel, predict_multiclass_batch, train_multiclass

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-10
WEIGHT_SUM_TOL = 1e-12


class BoostingError(ValueError):
    pass


@dataclass(frozen=True)
class WeakLearnerSpec:
    kernel_id: str
    c: float = 10.0


@dataclass
class BoostRound:
    model: MulticlassSvmModel
    alpha: float
    kernel_id: str
    error: float = float("nan")


@dataclass
class BoostedEnsemble:
    classes: list
    rounds: list = field(default_factory=list)

    @property
    def alphas(self):
        return [r.alpha for r in self.rounds]

    @property
    def kernel_ids(self):
        return sorted({r.kernel_id for r in self.rounds})


def samme_alpha(error, n_classes):
    """ln((1 - e) / e) + ln(C - 1), with e floored at 1e-10."""
    e = max(error, EPS_FLOOR)
    return math.log((1.0 - e) / e) + math.log(n_classes - 1)


def update_weights(w, misclassified, alpha):
    """Scale misclassified weights by exp(alpha) and renormalize."""
    if not math.isfinite(alpha):
        raise BoostingError(f"non-finite alpha {alpha}")
    w = np.array(w, dtype=np.float64)
    idx = np.asarray(sorted(misclassified), dtype=np.intp)
    if idx.size:
        w[idx] *= math.exp(alpha)
    return w / w.sum()


def adaboost_train(
    labels,
    kernels,
    pool,
    rounds_T=8,
    n_classes=None,
    strategy=VOTE,
    tol=DEFAULT_TOL,
    on_round=None,
) -> BoostedEnsemble:
    """Boost per-kernel multiclass SVMs.

    ``kernels`` maps kernel ids to training Gram matrices (all over the same
    samples, in ``labels`` order). ``on_round`` is called after every round
    with the round's candidate errors and the new weights.
    """
    labels = np.asarray(labels, dtype=np.intp)
    n = labels.size
    n_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    if n_classes < 2 or np.unique(labels).size < 2:
        raise BoostingError("boosting needs at least 2 classes")
    if not pool:
        raise BoostingError("empty weak-learner pool")
    if rounds_T < 1:
        raise BoostingError("rounds_T must be >= 1")
    for spec in pool:
        if spec.kernel_id not in kernels:
            raise BoostingError(f"no kernel matrix for {spec.kernel_id!r}")

    chance = 1.0 - 1.0 / n_classes
    w = np.full(n, 1.0 / n)
    ens = BoostedEnsemble(list(range(n_classes)))
    for t in range(rounds_T):
        best = None
        errors = []
        for spec in pool:
            gram = kernels[spec.kernel_id]
            costs = spec.c * n * w
            model = train_multiclass(gram, labels, costs, strategy, tol)
            entries = getattr(gram, "entries", gram)
            wrong = predict_multiclass_batch(model, entries) != labels
            err = float(np.sum(w[wrong]))
            errors.append(err)
            if best is None or err < best[0]:
                best = (err, spec, model, np.flatnonzero(wrong))
        err, spec, model, wrong = best
        if err >= chance:
            if not ens.rounds:
                raise BoostingError(
                    f"first round weighted error {err:.4f} is no better than chance"
                )
            log.info("round %d: error %.4f at chance level, stopping", t, err)
            break
        alpha = samme_alpha(err, n_classes)
        ens.rounds.append(BoostRound(model, alpha, spec.kernel_id, err))
        w = update_weights(w, wrong, alpha)
        assert abs(w.sum() - 1.0) <= WEIGHT_SUM_TOL
        log.info("round %d: kernel %s error %.4f alpha %.4f", t, spec.kernel_id, err, alpha)
        if on_round is not None:
            on_round(t, errors, w)
        if max(err, EPS_FLOOR) <= EPS_FLOOR:
            break
    return ens


def boosted_scores(ens: BoostedEnsemble, per_kernel_rows):
    """Alpha-weighted class votes, shape (queries, classes)."""
    missing = [k for k in ens.kernel_ids if k not in per_kernel_rows]
    if missing:
        raise BoostingError(f"missing kernel rows for {', '.join(missing)}")
    m = None
    scores = None
    for r in ens.rounds:
        rows = np.atleast_2d(np.asarray(per_kernel_rows[r.kernel_id], dtype=np.float64))
        if scores is None:
            m = rows.shape[0]
            scores = np.zeros((m, len(ens.classes)))
        pred = predict_multiclass_batch(r.model, rows)
        scores[np.arange(m), pred] += r.alpha
    return scores


def boosted_predict(ens: BoostedEnsemble, per_kernel_rows):
    """argmax_c sum_t alpha_t [h_t = c], ties to the lowest class index.

    A single query's rows give an int, stacked rows an array.
    """
    scores = boosted_scores(ens, per_kernel_rows)
    pred = np.argmax(scores, axis=1)
    single = all(np.ndim(v) == 1 for v in per_kernel_rows.values())
    return int(pred[0]) if single else pred
