import numpy as np
import pytest

from byzgd.core import ConstraintBox, synthesize_problem

SIX_X = np.array([[1, 0], [0.8, 0.5], [0.5, 0.8], [0, 1], [-0.5, 0.8], [-0.8, 0.5]], dtype=float)
SIX_W_STAR = np.array([1.0, 1.0])


@pytest.fixture
def six_agents():
    box = ConstraintBox.cube(2, 100.0)
    return synthesize_problem([row[None, :] for row in SIX_X], SIX_W_STAR, None, 1, box)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
