"""Distance-substitution kernels, Gram matrices and their PSD repair."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptors import CHI2, DISTANCE_KINDS, DescriptorVector, distance_rows, pairwise_distances

JITTER_START = 1e-10
JITTER_LIMIT = 1.0


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class BaseKernel:
    id: str
    channel: str
    distance_kind: str = CHI2
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0.0 or not math.isfinite(self.gamma):
            raise KernelError(f"gamma must be a positive finite real, got {self.gamma}")
        if self.distance_kind not in DISTANCE_KINDS:
            raise KernelError(f"unknown distance kind {self.distance_kind!r}")


@dataclass(eq=False)
class KernelMatrix:
    entries: np.ndarray
    jitter: float = 0.0
    kernel_id: str = ""

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass
class LocalWeights:
    anchor: int
    w: np.ndarray


def kernel_value(f, gamma):
    """exp(-gamma * f); works elementwise on arrays of distances."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0.0):
        raise KernelError("distance must be non-negative")
    out = np.exp(-gamma * f)
    return float(out) if out.ndim == 0 else out


def default_gamma(distances):
    """Reciprocal of the mean strictly positive pairwise distance."""
    d = np.asarray(distances, dtype=np.float64).ravel()
    positive = d[d > 0.0]
    if positive.size == 0:
        raise KernelError("no strictly positive distances to estimate gamma from")
    return 1.0 / float(positive.mean())


def upper_distances(dist_matrix):
    """The i < j entries of a square distance matrix."""
    d = np.asarray(dist_matrix)
    return d[np.triu_indices(d.shape[0], k=1)]


def _cholesky_ok(m):
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def psd_repair(m):
    """Return ``(m + lam * I, lam)`` for the smallest ``lam = 1e-10 * 2**k`` that
    lets a Cholesky factorization succeed, or ``(m, 0.0)`` if it already does.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise KernelError("matrix must be square")
    if not np.array_equal(m, m.T):
        raise KernelError("matrix must be symmetric")
    if not np.all(np.isfinite(m)):
        raise KernelError("matrix has non-finite entries")
    if _cholesky_ok(m):
        return m, 0.0
    eye = np.eye(m.shape[0])
    k = 0
    while True:
        lam = JITTER_START * 2.0**k
        if lam > JITTER_LIMIT:
            raise KernelError("PSD repair would need jitter above 1.0")
        repaired = m + lam * eye
        if _cholesky_ok(repaired):
            return repaired, lam
        k += 1


def gram_from_distances(dist_matrix, gamma, kernel_id=""):
    k = kernel_value(dist_matrix, gamma)
    k = np.atleast_2d(k)
    np.fill_diagonal(k, 1.0)
    entries, lam = psd_repair(k)
    return KernelMatrix(entries, lam, kernel_id)


def stack_vectors(vectors, channel=None):
    """Stack DescriptorVectors into a matrix, checking channel and length."""
    vectors = list(vectors)
    if not vectors:
        raise KernelError("no vectors given")
    channel = channel if channel is not None else vectors[0].channel
    length = len(vectors[0])
    for v in vectors:
        if v.channel != channel:
            raise KernelError(f"channel mismatch: expected {channel}, got {v.channel}")
        if len(v) != length:
            raise KernelError("descriptor lengths differ")
    return np.vstack([v.values for v in vectors])


def build_kernel_matrix(vectors, bk: BaseKernel) -> KernelMatrix:
    rows = stack_vectors(vectors, bk.channel)
    return gram_from_distances(pairwise_distances(rows, bk.distance_kind), bk.gamma, bk.id)


def kernel_row(query, train_rows, bk: BaseKernel):
    """Kernel evaluations of one query against every training row."""
    if isinstance(query, DescriptorVector):
        if query.channel != bk.channel:
            raise KernelError(f"channel mismatch: expected {bk.channel}, got {query.channel}")
        query = query.values
    return kernel_value(distance_rows(query, train_rows, bk.distance_kind), bk.gamma)


def local_weights(i, distances_per_channel) -> LocalWeights:
    """w_ij = mean over channels r of exp(-d_r(x_i, x_j)^2)."""
    d = [np.asarray(x, dtype=np.float64) for x in distances_per_channel]
    if not d:
        raise KernelError("need at least one channel")
    n = d[0].size
    if any(x.size != n for x in d):
        raise KernelError("per-channel distance lists differ in length")
    w = sum(np.exp(-(x * x)) for x in d) / len(d)
    return LocalWeights(int(i), w)


def local_target_kernel(weights: LocalWeights, g):
    """G_i(p, q) = w_ip * w_iq * G(p, q)."""
    entries = g.entries if isinstance(g, KernelMatrix) else np.asarray(g, dtype=np.float64)
    w = np.asarray(weights.w)
    if entries.shape != (w.size, w.size):
        raise KernelError(f"weights of length {w.size} do not match a {entries.shape} matrix")
    return (w[:, None] * entries) * w[None, :]


def alignment_score(k1, k2):
    """Frobenius alignment <K1, K2> / (|K1| |K2|)."""
    a = k1.entries if isinstance(k1, KernelMatrix) else np.asarray(k1, dtype=np.float64)
    b = k2.entries if isinstance(k2, KernelMatrix) else np.asarray(k2, dtype=np.float64)
    if a.shape != b.shape:
        raise KernelError("matrices differ in shape")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise KernelError("alignment undefined for a zero matrix")
    return float(np.sum(a * b) / (na * nb))


def write_kernel_cache(path, km: KernelMatrix, bk: BaseKernel):
    """Header line, then the lower triangle row by row as round-trip decimals."""
    lines = [
        f"# kernelboost-kernel id={bk.id} channel={bk.channel} distance={bk.distance_kind} "
        f"gamma={bk.gamma!r} n={km.n} jitter={km.jitter!r}"
    ]
    for i in range(km.n):
        lines.append(" ".join(repr(float(v)) for v in km.entries[i, : i + 1]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_kernel_cache(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# kernelboost-kernel"):
        raise KernelError("missing kernel cache header")
    head = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    n = int(head["n"])
    if len(lines) - 1 != n:
        raise KernelError(f"expected {n} rows, found {len(lines) - 1}")
    entries = np.zeros((n, n))
    for i, line in enumerate(lines[1:]):
        vals = [float(v) for v in line.split()]
        if len(vals) != i + 1:
            raise KernelError(f"row {i} has {len(vals)} values, expected {i + 1}")
        entries[i, : i + 1] = vals
        entries[: i + 1, i] = vals
    bk = BaseKernel(head["id"], head["channel"], head["distance"], float(head["gamma"]))
    return KernelMatrix(entries, float(head["jitter"]), bk.id), bk
