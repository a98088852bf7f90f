import numpy as np
import pytest

from hcsenhance.rng import substream


@pytest.fixture
def rng():
    return substream(20260825, "tests")


@pytest.fixture
def float_image(rng):
    return rng.uniform(0.0, 255.0, (32, 32))


@pytest.fixture
def uint8_image(rng):
    return rng.integers(0, 256, (32, 32)).astype(np.uint8)
