"""Kernel SVM: an SMO dual solver with per-sample costs, and one-vs-one
multiclass composition evaluated by voting or by a decision DAG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .kernels import KernelMatrix

VOTE = "vote"
DAG = "dag"
STRATEGIES = (VOTE, DAG)

DEFAULT_TOL = 1e-3
MAX_PAIR_UPDATES = 10**7
TAU = 1e-12


class SvmError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass
class BinarySvmModel:
    """Dual solution; ``indices`` address rows of the Gram matrix it was trained on."""

    indices: np.ndarray
    coef: np.ndarray
    bias: float
    c: float
    tol: float
    iterations: int = 0
    alpha: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_support(self):
        return self.indices.size


@dataclass
class MulticlassSvmModel:
    classes: list
    pairwise: dict
    strategy: str = VOTE


def _as_array(gram):
    if isinstance(gram, KernelMatrix):
        return gram.entries
    return np.asarray(gram, dtype=np.float64)


def dual_objective(alpha, gram, labels):
    """sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = np.asarray(alpha) * np.asarray(labels, dtype=np.float64)
    return float(np.sum(alpha) - 0.5 * ay @ _as_array(gram) @ ay)


def smo_train(gram, labels, costs, tol=DEFAULT_TOL, max_updates=MAX_PAIR_UPDATES) -> BinarySvmModel:
    """Solve the soft-margin dual with maximal-violating-pair SMO.

    maximize   sum(a) - 1/2 a' Q a,   Q_ij = y_i y_j K_ij
    subject to 0 <= a_i <= costs_i,   sum(a_i y_i) = 0

    Stops when the largest KKT violation gap drops to ``tol``. The bias is
    the mean over free support vectors, or the midpoint of the feasible
    interval when none are free.
    """
    K = _as_array(gram)
    y = np.asarray(labels, dtype=np.float64)
    n = y.size
    if K.shape != (n, n):
        raise SvmError(f"Gram matrix shape {K.shape} does not match {n} labels")
    if not np.all(np.isfinite(K)):
        raise SvmError("non-finite kernel entries")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise SvmError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise SvmError("degenerate labels: both classes must be present")
    C = np.broadcast_to(np.asarray(costs, dtype=np.float64), (n,)).copy()
    if not np.all(C > 0.0) or not np.all(np.isfinite(C)):
        raise SvmError("costs must be positive and finite")

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    diag = np.diag(K).copy()
    pos = y > 0.0
    updates = 0
    while True:
        up = np.where(pos, alpha < C, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < C)
        v = -y * grad
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] <= tol:
            break
        if updates >= max_updates:
            raise ConvergenceError(f"SMO hit the cap of {max_updates} pair updates")
        updates += 1

        ci, cj = C[i], C[j]
        old_i, old_j = alpha[i], alpha[j]
        quad = diag[i] + diag[j] - 2.0 * K[i, j]
        if quad <= 0.0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            ai, aj = alpha[i] + delta, alpha[j] + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj, ai = 0.0, diff
            elif ai < 0.0:
                ai, aj = 0.0, -diff
            if diff > ci - cj:
                if ai > ci:
                    ai, aj = ci, ci - diff
            elif aj > cj:
                aj, ai = cj, cj + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            ai, aj = alpha[i] - delta, alpha[j] + delta
            if total > ci:
                if ai > ci:
                    ai, aj = ci, total - ci
            elif aj < 0.0:
                aj, ai = 0.0, total
            if total > cj:
                if aj > cj:
                    aj, ai = cj, total - cj
            elif ai < 0.0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # Q_ki = y_k y_i K_ki
        grad += y * (K[:, i] * (y[i] * (ai - old_i)) + K[:, j] * (y[j] * (aj - old_j)))

    v = -y * grad
    free = (alpha > 0.0) & (alpha < C)
    if np.any(free):
        bias = float(np.mean(v[free]))
    else:
        up = np.where(pos, alpha < C, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < C)
        hi = np.max(v[up]) if np.any(up) else np.inf
        lo = np.min(v[low]) if np.any(low) else -np.inf
        if not np.isfinite(hi):
            hi = lo
        if not np.isfinite(lo):
            lo = hi
        bias = float(0.5 * (hi + lo))
    support = np.flatnonzero(alpha > 0.0)
    return BinarySvmModel(
        indices=support,
        coef=alpha[support] * y[support],
        bias=bias,
        c=float(np.max(C)),
        tol=float(tol),
        iterations=updates,
        alpha=alpha,
    )


def decision_value(model: BinarySvmModel, k_row) -> float:
    """sum(coef_i * k_i) + bias for kernel values aligned with ``model.indices``."""
    k_row = np.asarray(k_row, dtype=np.float64)
    if k_row.shape != model.coef.shape:
        raise SvmError(f"kernel row of length {k_row.size} for {model.coef.size} support vectors")
    return float(np.dot(model.coef, k_row) + model.bias)


def decision_values(model: BinarySvmModel, k_rows) -> np.ndarray:
    """Batch form: ``k_rows`` columns index the same Gram rows as the model."""
    k_rows = np.atleast_2d(np.asarray(k_rows, dtype=np.float64))
    return k_rows[:, model.indices] @ model.coef + model.bias


def train_multiclass(gram, labels, costs=10.0, strategy=VOTE, tol=DEFAULT_TOL) -> MulticlassSvmModel:
    """One binary machine per class pair (a < b), trained on those samples only.

    The binary problem labels class ``a`` as +1. Support indices of each
    pairwise model are mapped back to rows of ``gram``.
    """
    if strategy not in STRATEGIES:
        raise SvmError(f"unknown strategy {strategy!r}")
    K = _as_array(gram)
    labels = np.asarray(labels)
    n = labels.size
    if K.shape != (n, n):
        raise SvmError(f"Gram matrix shape {K.shape} does not match {n} labels")
    costs = np.broadcast_to(np.asarray(costs, dtype=np.float64), (n,))
    classes = sorted(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise SvmError("multiclass training needs at least 2 classes")
    pairwise = {}
    for a, b in combinations(classes, 2):
        rows = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[rows] == a, 1.0, -1.0)
        sub = smo_train(K[np.ix_(rows, rows)], y, costs[rows], tol=tol)
        sub.indices = rows[sub.indices]
        sub.alpha = None
        pairwise[(a, b)] = sub
    return MulticlassSvmModel(classes, pairwise, strategy)


def _pair_winner(model, a, b, k_row):
    return a if decision_values(model.pairwise[(a, b)], k_row)[0] >= 0.0 else b


def predict_multiclass(model: MulticlassSvmModel, k_row, strategy=None, return_evaluations=False):
    """Classify one query from its kernel row against the training samples.

    VOTE counts pairwise wins, ties going to the lowest class index. DAG
    walks the decision DAG: the first and last surviving classes are
    compared and the loser is dropped, for exactly C - 1 evaluations.
    """
    strategy = strategy or model.strategy
    k_row = np.asarray(k_row, dtype=np.float64)
    needed = max((int(m.indices.max()) for m in model.pairwise.values() if m.n_support), default=-1)
    if k_row.ndim != 1 or k_row.size <= needed:
        raise SvmError("kernel row does not cover every support vector")
    evaluations = 0
    if strategy == VOTE:
        votes = dict.fromkeys(model.classes, 0)
        for a, b in model.pairwise:
            votes[_pair_winner(model, a, b, k_row)] += 1
            evaluations += 1
        best = max(votes.values())
        label = min(c for c, v in votes.items() if v == best)
    elif strategy == DAG:
        alive = list(model.classes)
        while len(alive) > 1:
            a, b = alive[0], alive[-1]
            evaluations += 1
            if _pair_winner(model, a, b, k_row) == a:
                alive.pop()
            else:
                alive.pop(0)
        label = alive[0]
    else:
        raise SvmError(f"unknown strategy {strategy!r}")
    return (label, evaluations) if return_evaluations else label


def predict_multiclass_batch(model: MulticlassSvmModel, k_rows, strategy=None) -> np.ndarray:
    """Vectorized :func:`predict_multiclass` over the rows of ``k_rows``."""
    strategy = strategy or model.strategy
    k_rows = np.atleast_2d(np.asarray(k_rows, dtype=np.float64))
    m = k_rows.shape[0]
    wins = {
        pair: decision_values(bm, k_rows) >= 0.0 for pair, bm in model.pairwise.items()
    }
    if strategy == VOTE:
        classes = np.asarray(model.classes)
        pos = {c: i for i, c in enumerate(model.classes)}
        votes = np.zeros((m, classes.size), dtype=np.int64)
        for (a, b), w in wins.items():
            votes[w, pos[a]] += 1
            votes[~w, pos[b]] += 1
        # argmax returns the first maximum, i.e. the lowest class index
        return classes[np.argmax(votes, axis=1)]
    if strategy == DAG:
        out = np.empty(m, dtype=np.int64)
        for r in range(m):
            alive = list(model.classes)
            while len(alive) > 1:
                a, b = alive[0], alive[-1]
                if wins[(a, b)][r]:
                    alive.pop()
                else:
                    alive.pop(0)
            out[r] = alive[0]
        return out
    raise SvmError(f"unknown strategy {strategy!r}")
