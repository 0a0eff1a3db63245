import numpy as np
import pytest

from kernelboost.harness.config import default_config
from kernelboost.harness.synthetic import make_dataset, write_tree

SMALL_OVERRIDES = {
    "image.size": "64",
    "siftbow.words": "16",
    "boost.rounds": "3",
    "svmknn.k": "4",
    "svmknn.shortlist": "8",
    "folds": "3",
}


@pytest.fixture(scope="session")
def small_config():
    return default_config().replace(SMALL_OVERRIDES)


@pytest.fixture(scope="session")
def small_dataset():
    """Four synthetic classes, 9 images each, 64x64."""
    return make_dataset(per_class=9, size=64, seed=7)


@pytest.fixture(scope="session")
def small_tree(tmp_path_factory, small_dataset):
    return write_tree(small_dataset, tmp_path_factory.mktemp("tree"))


@pytest.fixture(scope="session")
def small_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.cfg"
    path.write_text("".join(f"{k}={v}\n" for k, v in SMALL_OVERRIDES.items()))
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
