import numpy as np
import pytest

from spdalign.checks import random_spd

SEED = 20240811


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def spd(rng, side, lo=0.1, hi=10.0):
    return random_spd(rng, side, lo, hi)
