"""Shared fixtures for the checkpoint planning tests."""

import numpy as np
import pytest

from config import Config
from distribution_core import FaultDistribution, build_distribution
from distribution_io import write_distribution


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False,
                     help="run the slow sweeps on default-size distributions with default search settings")


@pytest.fixture(scope="session")
def full_size(request) -> bool:
    return request.config.getoption("--full")


def random_distribution(rng: np.random.Generator, max_entries: int = 25, max_span: int = 200,
                        max_count: int = 9) -> FaultDistribution:
    """Random distribution on [0, span) with up to ``max_entries`` distinct fault times."""
    span = int(rng.integers(2, max_span + 1))
    entries = int(rng.integers(1, min(max_entries, span) + 1))
    times = rng.choice(span, size=entries, replace=False)
    counts = rng.integers(1, max_count + 1, size=entries)
    return build_distribution(zip(times.tolist(), counts.tolist()), 0, span)


@pytest.fixture
def tiny():
    """Four faults: two at reset, one at t=1, one at t=3, on [0, 4)."""
    return build_distribution([(0, 2), (1, 1), (3, 1)], 0, 4)


@pytest.fixture
def tiny_file(tmp_path, tiny):
    path = tmp_path / "tiny.dist"
    write_distribution(tiny, path)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def default_config():
    return Config(None)
