"""
Shared fixtures for the test suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.core.gap_service import BehaviorModel  # noqa: E402
from src.core.phase_process import PhaseProcess  # noqa: E402
from src.core.queue_core import BatchDistribution  # noqa: E402

CONFIG_DIR = ROOT / "configs"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running regression or simulation check")


def example_road(qbar_vph: float) -> PhaseProcess:
    """Two-phase road with mean sojourns 60 s / 240 s and q1 = 3 q2."""
    mu1, mu2 = 1 / 60, 1 / 240
    generator = np.array([[-mu1, mu1], [mu2, -mu2]])
    return PhaseProcess.from_flow_ratio(generator, [3.0, 1.0], qbar_vph)


@pytest.fixture
def road70():
    return example_road(70.0)


@pytest.fixture
def road420():
    return example_road(420.0)


@pytest.fixture
def b1():
    return BehaviorModel.constant(7.0)


@pytest.fixture
def b2():
    return BehaviorModel.inconsistent([(6.22, 0.9), (14.0, 0.1)])


@pytest.fixture
def b3():
    return BehaviorModel.consistent([(6.22, 0.9), (14.0, 0.1)])


@pytest.fixture
def uniform_batches():
    return BatchDistribution.uniform(1, 7)


@pytest.fixture
def low_high_batches():
    return BatchDistribution(((1, 0.5), (7, 0.5)))


@pytest.fixture
def config_dir():
    return CONFIG_DIR
