from __future__ import annotations

import numpy as np
import pytest

from epidemictrl.economy import EconomyConfig, init_house_ledgers
from epidemictrl.rng import RngStreams
from epidemictrl.world import WorldConfig, WorldState, synthesize_population


def make_world(
    population: int = 40,
    seed: int = 0,
    with_ledgers: bool = True,
    **config_kwargs,
) -> WorldState:
    config = WorldConfig(population_size=population, seed=seed, **config_kwargs)
    streams = RngStreams.from_seed(seed)
    world = synthesize_population(config, streams)
    if with_ledgers:
        init_house_ledgers(world, EconomyConfig(), streams.economy)
    return world


@pytest.fixture
def small_world() -> WorldState:
    return make_world(population=40, seed=1)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
