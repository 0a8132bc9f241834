# tests/conftest.py
import os, sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))

import numpy as np
import pytest

from divlab.core.models import ProbVec


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_pmf(rng, n, floor=0.02):
    """Fully supported pmf with every mass at least floor / n."""
    w = rng.dirichlet(np.ones(n))
    w = (1.0 - floor) * w + floor / n
    return ProbVec(masses=w / w.sum())
