import numpy as np
import pytest

from winmp.benchgen import example1_strategies, gen_example1
from winmp.evals import parse_eval


@pytest.fixture(scope="session")
def example1():
    mdp, spec, d = gen_example1()
    return mdp, parse_eval(spec), d


@pytest.fixture(scope="session")
def example1_refs():
    return example1_strategies()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
