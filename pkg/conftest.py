import math

import numpy as np
import pytest

from curvkit import metric_core


@pytest.fixture
def rng():
    return np.random.default_rng(0xA1E)


@pytest.fixture
def tripod():
    return metric_core.tripod_metric()


@pytest.fixture
def circle4():
    return metric_core.circle_metric(4, 2 * math.pi)


@pytest.fixture
def euclidean_sample():
    M, config = metric_core.sample_model_space(0.0, 3, 12, seed=7)
    return M, config


@pytest.fixture
def sphere_sample():
    M, config = metric_core.sample_model_space(1.0, 2, 10, seed=7)
    return M, config


@pytest.fixture
def hyperbolic_sample():
    M, config = metric_core.sample_model_space(-1.0, 2, 10, seed=7)
    return M, config
