import numpy as np
import pytest

from mixedcorr.cli import read_csv_matrix
from mixedcorr.model import VariableKind


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the slow end-to-end checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def mtcars():
    from importlib import resources
    path = resources.files("mixedcorr") / "data" / "mtcars.csv"
    return read_csv_matrix(str(path))


# the eleven-column type vector for the motor-trend data
MTCARS_TYPES = [VariableKind.parse(t) for t in
                ("con ter con con con con con bin bin ter con").split()]


@pytest.fixture(scope="session")
def mtcars_types():
    return list(MTCARS_TYPES)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
