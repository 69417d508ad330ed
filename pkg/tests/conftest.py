"""Shared fixtures: small worlds and a cheaply trained encoder.

Module tests run on probe-scale worlds so the whole suite stays fast;
the full-scale default configuration is exercised only by the
acceptance tests.
"""

import numpy as np
import pytest

from recall_forge.config import DEFAULT_CONFIG, train_config_from
from recall_forge.encoder import init_params
from recall_forge.training import train_base
from recall_forge.world import WorldSpec, generate_world


@pytest.fixture(scope="session")
def probe_spec():
    return WorldSpec(num_attributes=4, values_per_attribute=4,
                     num_items=260, num_queries=90, edits_per_query=1,
                     confusables_per_query=2, feature_noise_sigma=0.05,
                     seed=11)


@pytest.fixture(scope="session")
def probe_world(probe_spec):
    return generate_world(probe_spec)


@pytest.fixture(scope="session")
def probe_params(probe_world):
    """Encoder adapted on the probe world; good enough to rank sanely."""
    init = init_params(2 * probe_world.spec.feature_dim,
                       probe_world.spec.feature_dim, seed=12)
    cfg = train_config_from(DEFAULT_CONFIG, "stage1")
    cfg.batch_size = 24
    cfg.steps = 80
    cfg.seed = 13
    params, _ = train_base(init, probe_world.queries, cfg, world=probe_world)
    return params


@pytest.fixture(scope="session")
def raw_params(probe_world):
    """Untrained encoder over the probe world's dimensions."""
    return init_params(2 * probe_world.spec.feature_dim,
                       probe_world.spec.feature_dim, seed=21)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
