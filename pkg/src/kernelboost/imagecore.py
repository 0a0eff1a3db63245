"""Grayscale image ingestion: PGM parsing, bilinear resizing, dataset trees."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CANONICAL_SIZE = 128

_WHITESPACE = b" \t\r\n\v\f"


class PgmError(ValueError):
    """Malformed PGM input. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.reason = message
        self.offset = offset


class BadMagicError(PgmError):
    pass


class MissingDimensionsError(PgmError):
    pass


class PixelCountError(PgmError):
    pass


class ValueRangeError(PgmError):
    pass


class DatasetError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Luminance raster in [0, 1]; ``pixels`` has shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("pixels must be a non-empty 2-D array")
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValueError("pixel values must lie in [0, 1]")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None


@dataclass
class Dataset:
    classes: list[str]
    images: list[GrayImage] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if not self.names:
            self.names = [f"sample{i}" for i in range(len(self.images))]
        for lab in self.labels:
            if not 0 <= lab < len(self.classes):
                raise ValueError(f"label {lab} out of range for {len(self.classes)} classes")

    def __len__(self):
        return len(self.images)

    @property
    def samples(self):
        return list(zip(self.images, self.labels))

    def subset(self, indices):
        idx = [int(i) for i in indices]
        return Dataset(
            list(self.classes),
            [self.images[i] for i in idx],
            [self.labels[i] for i in idx],
            [self.names[i] for i in idx],
        )

    def check_trainable(self):
        """Training entry points need two classes, each with a sample."""
        if len(self.classes) < 2:
            raise DatasetError("training needs at least 2 classes")
        counts = np.bincount(np.asarray(self.labels, dtype=int), minlength=len(self.classes))
        empty = [self.classes[c] for c in np.flatnonzero(counts == 0)]
        if empty:
            raise DatasetError(f"classes without samples: {', '.join(empty)}")


class _HeaderReader:
    def __init__(self, data):
        self.data = data
        self.pos = 2

    def token(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            ch = data[self.pos : self.pos + 1]
            if ch in _WHITESPACE and ch:
                self.pos += 1
            elif ch == b"#":
                while self.pos < n and data[self.pos] not in (10, 13):
                    self.pos += 1
            else:
                break
        start = self.pos
        while self.pos < n and data[self.pos : self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        return data[start : self.pos], start


def _header_int(reader, what, error_cls):
    tok, offset = reader.token()
    if not tok:
        raise error_cls(f"missing {what}", offset)
    if not tok.isdigit():
        raise error_cls(f"invalid {what} {tok!r}", offset)
    return int(tok), offset


def load_pgm(data: bytes) -> GrayImage:
    """Parse a P2 or P5 PGM byte string. Sample ``v`` maps to ``v / maxval``."""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise BadMagicError(f"bad magic {magic!r}, expected P2 or P5", 0)
    reader = _HeaderReader(data)
    width, off = _header_int(reader, "width", MissingDimensionsError)
    height, _ = _header_int(reader, "height", MissingDimensionsError)
    if width == 0 or height == 0:
        raise MissingDimensionsError("zero image dimension", off)
    maxval, moff = _header_int(reader, "maxval", MissingDimensionsError)
    if not 1 <= maxval <= 65535:
        raise ValueRangeError(f"maxval {maxval} outside 1..65535", moff)
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        start = reader.pos + 1
        itemsize = 1 if maxval < 256 else 2
        raster = data[start:]
        if len(raster) < count * itemsize:
            raise PixelCountError(
                f"pixel count mismatch: expected {count} samples, "
                f"found {len(raster) // itemsize}",
                start + len(raster),
            )
        dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
        values = np.frombuffer(raster, dtype=dtype, count=count).astype(np.int64)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise ValueRangeError(
                f"value {values[bad[0]]} exceeds maxval {maxval}", start + int(bad[0]) * itemsize
            )
    else:
        values = np.empty(count, dtype=np.int64)
        for k in range(count):
            tok, offset = reader.token()
            if not tok:
                raise PixelCountError(
                    f"pixel count mismatch: expected {count} samples, found {k}", offset
                )
            if not tok.isdigit():
                raise PgmError(f"invalid sample {tok!r}", offset)
            v = int(tok)
            if v > maxval:
                raise ValueRangeError(f"value {v} exceeds maxval {maxval}", offset)
            values[k] = v

    pixels = values.reshape(height, width).astype(np.float64) / float(maxval)
    return GrayImage(pixels)


def write_pgm(img: GrayImage, binary=False, maxval=255) -> bytes:
    """Encode with samples ``round(p * maxval)``."""
    q = np.rint(img.pixels * maxval).astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if binary:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        return header + q.astype(dtype).tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    return header + rows.encode("ascii") + b"\n"


def read_pgm(path) -> GrayImage:
    return load_pgm(Path(path).read_bytes())


def _axis_coords(n_in, n_out):
    # pixel-center alignment, clamped at the borders
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(img: GrayImage, target_w: int, target_h: int) -> GrayImage:
    """Bilinear resampling with pixel-center alignment.

    A target dimension below 2 is rejected unless it leaves that axis
    unchanged.
    """
    for name, target, source in (("width", target_w, img.width), ("height", target_h, img.height)):
        if target < 1 or (target < 2 and target != source):
            raise ValueError(f"target {name} must be >= 2, got {target}")
    px = img.pixels
    x0, x1, fx = _axis_coords(img.width, target_w)
    y0, y1, fy = _axis_coords(img.height, target_h)
    top = px[y0][:, x0] + fx * (px[y0][:, x1] - px[y0][:, x0])
    bottom = px[y1][:, x0] + fx * (px[y1][:, x1] - px[y1][:, x0])
    out = top + fy[:, None] * (bottom - top)
    return GrayImage(np.clip(out, px.min(), px.max()))


def ingest_directory(root, size=CANONICAL_SIZE) -> Dataset:
    """Load ``root/<class>/<file>.pgm``, resizing every image to size x size."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DatasetError(f"dataset root {root} has no class directories")
    images, labels, names = [], [], []
    for label, cls in enumerate(classes):
        files = sorted(
            p for p in (root / cls).iterdir() if p.is_file() and p.suffix.lower() == ".pgm"
        )
        if not files:
            raise DatasetError(f"class {cls!r} has no .pgm images")
        for path in files:
            try:
                img = read_pgm(path)
            except (OSError, PgmError) as exc:
                raise DatasetError(f"cannot read {path}: {exc}") from exc
            if (img.width, img.height) != (size, size):
                img = resize_bilinear(img, size, size)
            images.append(img)
            labels.append(label)
            names.append(os.path.join(cls, path.name))
    return Dataset(classes, images, labels, names)
