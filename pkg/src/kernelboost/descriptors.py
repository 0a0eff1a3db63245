"""Image descriptors (PHOG, dense SIFT bag-of-words, tiny images) and distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .imagecore import GrayImage, resize_bilinear
from .rng import Lcg64

CHI2_EPS = 1e-10
SIFT_CLIP = 0.2
SIFT_CELLS = 4
SIFT_BINS = 8
SIFT_LENGTH = SIFT_CELLS * SIFT_CELLS * SIFT_BINS

L2 = "l2"
CHI2 = "chi2"
DISTANCE_KINDS = (L2, CHI2)


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class PhogSpec:
    levels: int = 2
    bins: int = 8
    signed: bool = False
    channel = "phog"

    def __post_init__(self):
        if self.levels < 0 or self.bins < 2:
            raise DescriptorError("PHOG needs levels >= 0 and bins >= 2")

    @property
    def length(self):
        return self.bins * sum(4**l for l in range(self.levels + 1))

    def params(self):
        return {"levels": self.levels, "bins": self.bins, "signed": self.signed}


@dataclass(frozen=True)
class SiftBowSpec:
    step: int = 8
    patch: int = 16
    words: int = 64
    seed: int = 0
    channel = "siftbow"

    def __post_init__(self):
        if self.step < 1 or self.words < 1:
            raise DescriptorError("SIFTBOW needs step >= 1 and words >= 1")
        if self.patch < SIFT_CELLS or self.patch % SIFT_CELLS:
            raise DescriptorError(f"patch size must be a positive multiple of {SIFT_CELLS}")

    def params(self):
        return {"step": self.step, "patch": self.patch, "words": self.words, "seed": self.seed}


@dataclass(frozen=True)
class TinyImageSpec:
    side: int = 16
    channel = "tiny"

    def __post_init__(self):
        if self.side < 2:
            raise DescriptorError("tiny image side must be >= 2")

    def params(self):
        return {"side": self.side}


@dataclass(frozen=True, eq=False)
class DescriptorVector:
    channel: str
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, DescriptorVector):
            return NotImplemented
        return self.channel == other.channel and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass
class Codebook:
    words: np.ndarray
    seed: int
    inertia: float
    history: tuple = ()

    @property
    def k(self):
        return self.words.shape[0]


def sobel_gradients(img: GrayImage, signed=False):
    """Magnitude and orientation (radians) from 3x3 Sobel stencils.

    Borders replicate the edge pixels. Orientation is ``atan2(gy, gx)`` with
    rows growing downwards, folded into [0, pi) or, if ``signed``, [0, 2 pi).
    """
    if img.width < 3 or img.height < 3:
        raise DescriptorError("Sobel needs an image of at least 3x3")
    p = np.pad(img.pixels, 1, mode="edge")
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    mag = np.hypot(gx, gy)
    period = 2.0 * math.pi if signed else math.pi
    ori = np.mod(np.arctan2(gy, gx), period)
    ori[(ori >= period) | (ori < 0.0)] = 0.0
    return mag, ori


def _orientation_bins(ori, bins, period):
    # linear interpolation between bin positions k * period / bins
    pos = ori * (bins / period)
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.intp) % bins
    return lo, (lo + 1) % bins, frac


def _cell_bounds(n, parts):
    return [(n * i) // parts for i in range(parts + 1)]


def phog(img: GrayImage, spec: PhogSpec = PhogSpec()) -> DescriptorVector:
    """Pyramid of magnitude-weighted orientation histograms, globally L1-normalized."""
    cells = 2**spec.levels
    if img.width // cells < 2 or img.height // cells < 2:
        raise DescriptorError(
            f"level {spec.levels} cells would be smaller than 2x2 on a {img.width}x{img.height} image"
        )
    mag, ori = sobel_gradients(img, signed=spec.signed)
    period = 2.0 * math.pi if spec.signed else math.pi
    lo, hi, frac = _orientation_bins(ori, spec.bins, period)
    w_lo = mag * (1.0 - frac)
    w_hi = mag * frac

    parts = []
    for level in range(spec.levels + 1):
        n = 2**level
        xb = _cell_bounds(img.width, n)
        yb = _cell_bounds(img.height, n)
        col_cell = np.searchsorted(xb, np.arange(img.width), side="right") - 1
        row_cell = np.searchsorted(yb, np.arange(img.height), side="right") - 1
        cell = (row_cell[:, None] * n + col_cell[None, :]) * spec.bins
        size = n * n * spec.bins
        hist = np.bincount((cell + lo).ravel(), weights=w_lo.ravel(), minlength=size)
        hist += np.bincount((cell + hi).ravel(), weights=w_hi.ravel(), minlength=size)
        parts.append(hist)
    vec = np.concatenate(parts)
    total = vec.sum()
    if total > 0.0:
        vec = vec / total
    else:
        vec = np.zeros_like(vec)
    return DescriptorVector(spec.channel, vec)


def sift_normalize(raw):
    """L2-normalize, clip at 0.2, renormalize. Returns (final, clipped)."""
    v = raw / np.linalg.norm(raw)
    clipped = np.minimum(v, SIFT_CLIP)
    return clipped / np.linalg.norm(clipped), clipped


def _patch_layout(patch):
    cell = patch // SIFT_CELLS
    r = np.arange(patch)
    cell_of = (r[:, None] // cell) * SIFT_CELLS + (r[None, :] // cell)
    centre = (patch - 1) / 2.0
    sigma = patch / 2.0
    d2 = (r[:, None] - centre) ** 2 + (r[None, :] - centre) ** 2
    return cell_of, np.exp(-d2 / (2.0 * sigma * sigma))


def dense_sift_raw(img: GrayImage, spec: SiftBowSpec = SiftBowSpec()):
    """Unnormalized 128-bin histograms for every grid patch, shape (npatch, 128)."""
    if spec.patch > img.width or spec.patch > img.height:
        raise DescriptorError(f"patch {spec.patch} does not fit a {img.width}x{img.height} image")
    mag, ori = sobel_gradients(img, signed=True)
    lo, hi, frac = _orientation_bins(ori, SIFT_BINS, 2.0 * math.pi)
    cell_of, gauss = _patch_layout(spec.patch)
    ys = np.arange(0, img.height - spec.patch + 1, spec.step)
    xs = np.arange(0, img.width - spec.patch + 1, spec.step)
    off = np.arange(spec.patch)
    rows = (ys[:, None, None, None] + off[None, None, :, None])
    cols = (xs[None, :, None, None] + off[None, None, None, :])
    # (ny, nx, patch, patch) views of the per-pixel quantities
    m = mag[rows, cols] * gauss
    base = np.arange(ys.size * xs.size).reshape(ys.size, xs.size, 1, 1) * SIFT_LENGTH
    base = base + cell_of * SIFT_BINS
    size = ys.size * xs.size * SIFT_LENGTH
    f = frac[rows, cols]
    hist = np.bincount((base + lo[rows, cols]).ravel(), weights=(m * (1.0 - f)).ravel(), minlength=size)
    hist += np.bincount((base + hi[rows, cols]).ravel(), weights=(m * f).ravel(), minlength=size)
    return hist.reshape(-1, SIFT_LENGTH)


def dense_sift_lite(img: GrayImage, spec: SiftBowSpec = SiftBowSpec()) -> list[np.ndarray]:
    """SIFT-style 4x4x8 descriptors on a dense grid; zero-energy patches dropped."""
    raw = dense_sift_raw(img, spec)
    out = []
    for h in raw:
        if h.sum() > 0.0:
            out.append(sift_normalize(h)[0])
    return out


def _sq_dists(points, centers):
    return cdist(points, centers, metric="sqeuclidean")


def _kmeanspp(points, k, rng):
    n = points.shape[0]
    chosen = [rng.randbelow(n)]
    d2 = _sq_dists(points, points[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        cum = np.cumsum(d2)
        u = rng.uniform() * cum[-1]
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= n or d2[idx] == 0.0:
            idx = int(np.flatnonzero(d2 > 0.0)[-1])
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(points, points[idx][None, :])[:, 0])
    return points[chosen].copy()


def build_codebook(all_locals, k: int, seed: int = 0, max_iter=100, move_tol=1e-6) -> Codebook:
    """k-means with k-means++ seeding drawn from :class:`~kernelboost.rng.Lcg64`.

    Lloyd iterations stop once no centroid moves by ``move_tol`` or more.
    Empty clusters are re-seeded to the point farthest from its centroid.
    """
    points = np.asarray(all_locals, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DescriptorError("codebook needs a non-empty 2-D set of local descriptors")
    if k < 1:
        raise DescriptorError("k must be positive")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise DescriptorError(f"only {distinct} distinct local descriptors for k={k}")

    rng = Lcg64(seed)
    centers = _kmeanspp(points, k, rng)
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        assign = np.argmin(d2, axis=1)
        history.append(float(np.sum((points - centers[assign]) ** 2)))
        counts = np.bincount(assign, minlength=k)
        new = np.zeros_like(centers)
        np.add.at(new, assign, points)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        empty = np.flatnonzero(~nonempty)
        if empty.size:
            own = d2[np.arange(points.shape[0]), assign]
            order = np.argsort(-own, kind="stable")
            for c, p in zip(empty, order):
                new[c] = points[p]
        shift = np.sqrt(np.max(np.sum((new - centers) ** 2, axis=1)))
        centers = new
        if shift < move_tol:
            break
    assign = np.argmin(_sq_dists(points, centers), axis=1)
    inertia = float(np.sum((points - centers[assign]) ** 2))
    history.append(inertia)
    return Codebook(centers, seed, inertia, tuple(history))


def bow_histogram(locals_, codebook: Codebook, channel=SiftBowSpec.channel) -> DescriptorVector:
    """Nearest-word counts, L1-normalized; empty input gives the uniform histogram."""
    k = codebook.k
    if k == 0:
        raise DescriptorError("empty codebook")
    locals_ = np.asarray(locals_, dtype=np.float64)
    if locals_.size == 0:
        return DescriptorVector(channel, np.full(k, 1.0 / k))
    assign = np.argmin(_sq_dists(locals_.reshape(-1, codebook.words.shape[1]), codebook.words), axis=1)
    counts = np.bincount(assign, minlength=k).astype(np.float64)
    return DescriptorVector(channel, counts / counts.sum())


def tiny_image(img: GrayImage, spec: TinyImageSpec = TinyImageSpec()) -> DescriptorVector:
    small = resize_bilinear(img, spec.side, spec.side)
    return DescriptorVector(spec.channel, small.pixels.ravel())


def distance_rows(a, rows, kind):
    """Distance from vector ``a`` to every row of ``rows``."""
    rows = np.atleast_2d(rows)
    if kind == L2:
        diff = rows - a
        return np.sqrt(np.sum(diff * diff, axis=1))
    if kind == CHI2:
        diff = rows - a
        return 0.5 * np.sum(diff * diff / (rows + a + CHI2_EPS), axis=1)
    raise DescriptorError(f"unknown distance kind {kind!r}")


def distance(a: DescriptorVector, b: DescriptorVector, kind=CHI2) -> float:
    if a.channel != b.channel:
        raise DescriptorError(f"channel mismatch: {a.channel} vs {b.channel}")
    if len(a) != len(b):
        raise DescriptorError(f"length mismatch: {len(a)} vs {len(b)}")
    return float(distance_rows(a.values, b.values[None, :], kind)[0])


def pairwise_distances(rows, kind):
    """Symmetric distance matrix; row i is computed once and mirrored."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        d = distance_rows(rows[i], rows[i + 1 :], kind)
        out[i, i + 1 :] = d
        out[i + 1 :, i] = d
    return out


def write_descriptor_cache(path, records, header):
    """Write ``(sample_id, DescriptorVector)`` records, one per line.

    Line 1 is ``# kernelboost-descriptors`` followed by ``key=value`` spec
    parameters; records are tab-separated ``id, channel, length, values``
    with values as round-trip decimals separated by spaces.
    """
    params = " ".join(f"{k}={v}" for k, v in header.items())
    lines = [f"# kernelboost-descriptors {params}".rstrip()]
    for sample_id, vec in records:
        if "\t" in sample_id or "\n" in sample_id:
            raise DescriptorError(f"sample id {sample_id!r} contains a tab or newline")
        values = " ".join(repr(float(v)) for v in vec.values)
        lines.append(f"{sample_id}\t{vec.channel}\t{len(vec)}\t{values}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_descriptor_cache(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# kernelboost-descriptors"):
        raise DescriptorError("missing descriptor cache header")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 4:
            raise DescriptorError(f"line {lineno}: expected 4 tab-separated fields")
        sample_id, channel, length, values = fields
        vals = np.array([float(v) for v in values.split()], dtype=np.float64)
        if vals.size != int(length):
            raise DescriptorError(f"line {lineno}: length {length} but {vals.size} values")
        records.append((sample_id, DescriptorVector(channel, vals)))
    return header, records
