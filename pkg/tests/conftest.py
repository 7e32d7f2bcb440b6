import numpy as np
import pytest
from hypothesis import settings

from temperlevy.model import ModelSpec, TweedieExp, reference_model
from temperlevy.sampler import cached_grid_pair

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

# lines recorded by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_model():
    return reference_model()


@pytest.fixture(scope="session")
def tweedie():
    return ModelSpec.build(TweedieExp(1.0, 1.0, 0.5))


@pytest.fixture(scope="session")
def ref_grids(ref_model):
    return cached_grid_pair(ref_model, 1.0)


@pytest.fixture(scope="session")
def grids_tweedie(tweedie):
    return cached_grid_pair(tweedie, 1.0)


@pytest.fixture
def gen():
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(12345)))
