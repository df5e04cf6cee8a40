import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from revhyp.measure import ProbabilitySpace
from revhyp.semigroup import random_generator, simple_generator

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_point():
    return simple_generator(ProbabilitySpace.uniform(2))


@pytest.fixture
def small_chain():
    return random_generator(5, np.random.default_rng(3))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
