import numpy as np
import pytest

from loftseg import BinaryMask, GrayImage16


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def img(values) -> GrayImage16:
    return GrayImage16(np.asarray(values, dtype=np.uint16))


def mask(values) -> BinaryMask:
    return BinaryMask(np.asarray(values, dtype=bool))
