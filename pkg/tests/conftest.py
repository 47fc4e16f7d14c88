from pathlib import Path

import numpy as np
import pytest

from walker_soliton.grid import GridSpec

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid3():
    return GridSpec.uniform(n=3)


def at(x=0.0, y=0.0, u=0.0, v=0.0):
    return (x, y, u, v)
