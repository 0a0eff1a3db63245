"""Flat ``key=value`` experiment configuration.

Blank lines and lines starting with ``#`` are ignored. Every key is
optional; unknown or repeated keys are rejected. Keys and defaults:

    image.size=128                  canonical square side after resizing
    channels=phog,siftbow           descriptor channels to compute
    phog.levels=2  phog.bins=8  phog.signed=false
    siftbow.step=8  siftbow.patch=16  siftbow.words=64  siftbow.seed=0
    siftbow.codebook_samples=20000  local descriptors sampled for k-means (0 = all)
    tiny.side=16
    kernel.<channel>.distance=chi2  (l2 for tiny)
    kernel.<channel>.gamma=auto     or a positive real
    svm.c=10  svm.tol=0.001  svm.kernel=phog  svm.strategy=vote
    knn.k=5  knn.channel=phog  knn.distance=chi2      (NN uses k=1)
    svmknn.k=10  svmknn.shortlist=30  svmknn.channel=phog
    svmknn.cheap=l2  svmknn.costly=chi2  svmknn.strategy=vote
    boost.rounds=8  boost.pool=phog,siftbow  boost.c=10
    folds=5  seed=0
"""

from __future__ import annotations

from dataclasses import dataclass

from ..descriptors import CHI2, DISTANCE_KINDS, L2, PhogSpec, SiftBowSpec, TinyImageSpec
from ..svm import STRATEGIES

CHANNELS = ("phog", "siftbow", "tiny")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "image.size": "128",
    "channels": "phog,siftbow",
    "phog.levels": "2",
    "phog.bins": "8",
    "phog.signed": "false",
    "siftbow.step": "8",
    "siftbow.patch": "16",
    "siftbow.words": "64",
    "siftbow.seed": "0",
    "siftbow.codebook_samples": "20000",
    "tiny.side": "16",
    "kernel.phog.distance": CHI2,
    "kernel.phog.gamma": "auto",
    "kernel.siftbow.distance": CHI2,
    "kernel.siftbow.gamma": "auto",
    "kernel.tiny.distance": L2,
    "kernel.tiny.gamma": "auto",
    "svm.c": "10",
    "svm.tol": "0.001",
    "svm.kernel": "phog",
    "svm.strategy": "vote",
    "knn.k": "5",
    "knn.channel": "phog",
    "knn.distance": CHI2,
    "svmknn.k": "10",
    "svmknn.shortlist": "30",
    "svmknn.channel": "phog",
    "svmknn.cheap": L2,
    "svmknn.costly": CHI2,
    "svmknn.strategy": "vote",
    "boost.rounds": "8",
    "boost.pool": "phog,siftbow",
    "boost.c": "10",
    "folds": "5",
    "seed": "0",
}


def _int(flat, key, minimum=None):
    try:
        value = int(flat[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {flat[key]!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _float(flat, key, positive=True):
    try:
        value = float(flat[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a real number, got {flat[key]!r}") from None
    if positive and not value > 0.0:
        raise ConfigError(f"{key}: must be positive, got {value}")
    return value


def _bool(flat, key):
    raw = flat[key].lower()
    if raw in ("true", "1", "yes"):
        return True
    if raw in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {flat[key]!r}")


def _choice(flat, key, options):
    if flat[key] not in options:
        raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {flat[key]!r}")
    return flat[key]


def _channel_list(flat, key):
    items = [s.strip() for s in flat[key].split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: empty channel list")
    for ch in items:
        if ch not in CHANNELS:
            raise ConfigError(f"{key}: unknown channel {ch!r}")
    if len(set(items)) != len(items):
        raise ConfigError(f"{key}: channel listed twice")
    return tuple(items)


@dataclass(frozen=True)
class ExperimentConfig:
    flat: tuple

    canonical_size: int
    channels: tuple
    phog: PhogSpec
    siftbow: SiftBowSpec
    tiny: TinyImageSpec
    codebook_samples: int
    distance: dict
    gamma: dict
    svm_c: float
    svm_tol: float
    svm_kernel: str
    svm_strategy: str
    knn_k: int
    knn_channel: str
    knn_distance: str
    svmknn_k: int
    svmknn_shortlist: int
    svmknn_channel: str
    svmknn_cheap: str
    svmknn_costly: str
    svmknn_strategy: str
    boost_rounds: int
    boost_pool: tuple
    boost_c: float
    folds: int
    seed: int

    @classmethod
    def from_flat(cls, overrides=None):
        flat = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            flat[key] = str(value).strip()

        channels = _channel_list(flat, "channels")
        distance, gamma = {}, {}
        for ch in CHANNELS:
            distance[ch] = _choice(flat, f"kernel.{ch}.distance", DISTANCE_KINDS)
            raw = flat[f"kernel.{ch}.gamma"]
            gamma[ch] = None if raw.lower() == "auto" else _float(flat, f"kernel.{ch}.gamma")

        def channel(key):
            ch = _choice(flat, key, CHANNELS)
            if ch not in channels:
                raise ConfigError(f"{key}: channel {ch!r} is not listed in channels")
            return ch

        pool = _channel_list(flat, "boost.pool")
        for ch in pool:
            if ch not in channels:
                raise ConfigError(f"boost.pool: channel {ch!r} is not listed in channels")
        try:
            phog = PhogSpec(_int(flat, "phog.levels"), _int(flat, "phog.bins"), _bool(flat, "phog.signed"))
            sift = SiftBowSpec(
                _int(flat, "siftbow.step"),
                _int(flat, "siftbow.patch"),
                _int(flat, "siftbow.words"),
                _int(flat, "siftbow.seed"),
            )
            tiny = TinyImageSpec(_int(flat, "tiny.side"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        k = _int(flat, "svmknn.k", 2)
        shortlist = _int(flat, "svmknn.shortlist", 1)
        if shortlist < k:
            raise ConfigError("svmknn.shortlist must be >= svmknn.k")
        cfg = cls(
            flat=tuple(sorted(flat.items())),
            canonical_size=_int(flat, "image.size", 8),
            channels=channels,
            phog=phog,
            siftbow=sift,
            tiny=tiny,
            codebook_samples=_int(flat, "siftbow.codebook_samples", 0),
            distance=distance,
            gamma=gamma,
            svm_c=_float(flat, "svm.c"),
            svm_tol=_float(flat, "svm.tol"),
            svm_kernel=channel("svm.kernel"),
            svm_strategy=_choice(flat, "svm.strategy", STRATEGIES),
            knn_k=_int(flat, "knn.k", 1),
            knn_channel=channel("knn.channel"),
            knn_distance=_choice(flat, "knn.distance", DISTANCE_KINDS),
            svmknn_k=k,
            svmknn_shortlist=shortlist,
            svmknn_channel=channel("svmknn.channel"),
            svmknn_cheap=_choice(flat, "svmknn.cheap", DISTANCE_KINDS),
            svmknn_costly=_choice(flat, "svmknn.costly", DISTANCE_KINDS),
            svmknn_strategy=_choice(flat, "svmknn.strategy", STRATEGIES),
            boost_rounds=_int(flat, "boost.rounds", 1),
            boost_pool=pool,
            boost_c=_float(flat, "boost.c"),
            folds=_int(flat, "folds", 2),
            seed=_int(flat, "seed"),
        )
        return cfg

    def as_dict(self):
        return dict(self.flat)

    def replace(self, mapping):
        """New config with the given flat keys changed."""
        flat = self.as_dict()
        flat.update(mapping)
        return ExperimentConfig.from_flat(flat)

    def to_text(self):
        return "".join(f"{k}={v}\n" for k, v in self.flat)


def parse_config(text) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: key {key!r} defined twice")
        values[key] = value
    return ExperimentConfig.from_flat(values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def default_config() -> ExperimentConfig:
    return ExperimentConfig.from_flat()
