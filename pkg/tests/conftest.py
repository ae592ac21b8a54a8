import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.Problem import build_problem


@pytest.fixture
def interval_problem():
    """Constant n = 4 on [0, 1]"""
    return build_problem({"geometry": {"type": "interval", "a": 0.0, "b": 1.0},
                          "index": {"mode": "fixed", "n": 4}, "collar_width": 0.1})


@pytest.fixture
def disk_problem():
    return build_problem({"geometry": {"type": "disk", "radius": 1.0},
                          "index": {"mode": "fixed", "n": 4}, "collar_width": 0.1})


@pytest.fixture
def absorbing_problem():
    """Real part 4 with an absorbing bump of height 1 centred at x = 0.5"""
    return build_problem({"geometry": {"type": "interval", "a": 0.0, "b": 1.0},
                          "index": {"mode": "fixed", "n": "4 + I*exp(-50*(x - 0.5)**2)"},
                          "collar_width": 0.1})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: sweeps over many angular modes")
