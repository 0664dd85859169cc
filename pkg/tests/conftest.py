"""Shared fixtures for the projection test suite."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'scripts'))

from projection.entry_game import get_dgp, simulate  # noqa: E402
from projection.moment_model import linear_model, mean_model  # noqa: E402


@pytest.fixture
def mean_data():
    """400 draws of N(0.2, 1) as a one-column matrix."""
    rng = np.random.default_rng(20240601)
    return rng.normal(0.2, 1.0, size=(400, 1))


@pytest.fixture
def mean_equality_model():
    return mean_model(lower=-1.0, upper=1.0, equality=True)


@pytest.fixture
def linear_setup():
    """Two inequality moments theta_k - X_k <= 0 on [0, 1]^2 with data."""
    rng = np.random.default_rng(7)
    data = rng.normal([0.4, 0.6], [0.5, 0.8], size=(500, 2))
    model = linear_model(np.eye(2), [[0.0, 1.0], [0.0, 1.0]])
    return model, data


@pytest.fixture
def set1_spec():
    return get_dgp('set1')


@pytest.fixture
def set1_sample(set1_spec):
    return simulate(set1_spec, n=1000, seed=1)
