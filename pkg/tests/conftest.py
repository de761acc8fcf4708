import numpy as np
import pytest

from activetrack.config import ExperimentConfig


@pytest.fixture(scope="session")
def desk_cfg():
    return ExperimentConfig.desk()


@pytest.fixture(scope="session")
def table(desk_cfg):
    return desk_cfg.table()


@pytest.fixture(scope="session")
def model(desk_cfg, table):
    return desk_cfg.model(table)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
