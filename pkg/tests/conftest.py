import pytest

from gpudse.config import load_config, make_space
from gpudse.perfmodel import Evaluator


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def spec(cfg):
    return make_space(cfg)


@pytest.fixture(scope="session")
def evaluator(cfg, spec):
    return Evaluator.from_config(cfg, spec)
