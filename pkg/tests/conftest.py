import numpy as np
import pytest
from hypothesis import settings

import oracles
from matskewt.mvst import MvstParams

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_params(rng, n, p, nu=None, skew=1.0, cond=5.0):
    """A random, well-conditioned MVST parameter set of shape (n, p)."""
    return MvstParams(
        location=rng.normal(size=(n, p)),
        skewness=skew * rng.normal(size=(n, p)),
        row_scale=oracles.random_spd(rng, n, cond),
        col_scale=oracles.random_spd(rng, p, cond),
        dof=float(rng.uniform(3.0, 12.0)) if nu is None else nu,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_params():
    return random_params
