"""Synthetic four-class image set with channel-specific structure.

* ``bars_h`` / ``bars_v``: scattered long bars, nearly horizontal or nearly
  vertical. The classes differ only in edge orientation.
* ``studs`` / ``holes``: scattered small crosses, bright on a dark ground or
  dark on a bright ground. A ``holes`` image is distributed exactly like
  ``1 - studs``, which leaves every unsigned gradient histogram unchanged;
  only signed local structure tells them apart.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..imagecore import Dataset, GrayImage, write_pgm

CLASSES = ("bars_h", "bars_v", "studs", "holes")


def _bar(xx, yy, cx, cy, theta, half_len, half_thick):
    c, s = np.cos(theta), np.sin(theta)
    along = (xx - cx) * c + (yy - cy) * s
    across = -(xx - cx) * s + (yy - cy) * c
    return np.clip(0.5 + half_thick - np.abs(across), 0.0, 1.0) * np.clip(
        0.5 + half_len - np.abs(along), 0.0, 1.0
    )


def _cross(xx, yy, cx, cy, arm, half_thick):
    dx, dy = np.abs(xx - cx), np.abs(yy - cy)
    horiz = (dx <= arm) & (dy <= half_thick)
    vert = (dy <= arm) & (dx <= half_thick)
    return (horiz | vert).astype(np.float64)


def render(label, rng, size=128, noise=0.02):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    background = rng.uniform(0.15, 0.35)
    contrast = rng.uniform(0.4, 0.6)
    cover = np.zeros((size, size))
    if label in (0, 1):
        base = 0.0 if label == 0 else np.pi / 2
        for _ in range(rng.integers(6, 10)):
            theta = base + rng.uniform(-0.15, 0.15)
            cover = np.maximum(
                cover,
                _bar(
                    xx,
                    yy,
                    rng.uniform(10, size - 10),
                    rng.uniform(10, size - 10),
                    theta,
                    rng.uniform(15, 30),
                    rng.uniform(1.5, 2.5),
                ),
            )
    else:
        for _ in range(rng.integers(12, 18)):
            cx, cy = rng.integers(8, size - 8, size=2)
            cover = np.maximum(cover, _cross(xx, yy, cx, cy, int(rng.integers(4, 7)), 1))
    img = np.clip(background + contrast * cover + rng.normal(0.0, noise, size=(size, size)), 0.0, 1.0)
    if label == 3:
        img = 1.0 - img
    return GrayImage(img)


def make_dataset(per_class=100, size=128, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    images, labels, names = [], [], []
    for label, cls in enumerate(CLASSES):
        for i in range(per_class):
            images.append(render(label, rng, size))
            labels.append(label)
            names.append(f"{cls}/{cls}_{i:03d}.pgm")
    return Dataset(list(CLASSES), images, labels, names)


def write_tree(dataset: Dataset, root, binary=True):
    """Write ``root/<class>/<file>.pgm`` for every sample."""
    root = Path(root)
    for img, label, name in zip(dataset.images, dataset.labels, dataset.names):
        path = root / dataset.classes[label] / Path(name).name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(write_pgm(img, binary=binary))
    return root
