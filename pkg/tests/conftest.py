"""Shared fixtures: one small dataset and one briefly trained model.

Session scope keeps the expensive pieces (simulation, training) to a
single run each; tests must not mutate fixture state.
"""

import numpy as np
import pytest

import stci


@pytest.fixture(scope="session")
def tiny_dataset():
    grid = stci.GridSpec(n_rows=16, n_cols=16, n_steps=60, lag=1)
    spec = stci.InterventionSpec(region=stci.region_mask(16, 16, (5, 9), (5, 9)))
    return stci.generate(grid, stci.DiffusionParams(), spec, seed=3)


@pytest.fixture(scope="session")
def tiny_trained(tiny_dataset):
    config = stci.ModelConfig(epochs=2, batch_size=16, seed=1)
    return stci.train(tiny_dataset, config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
