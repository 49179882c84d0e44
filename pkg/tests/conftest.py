import numpy as np
import pytest

from utils.data_io import PointerTaskSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noiseless_spec():
    return PointerTaskSpec(grid=(4, 4), image_size=(16, 16), n_classes=4, n_targets=4,
                           noise_std=0.0, per_class=10, seed=3)
