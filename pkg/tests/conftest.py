import numpy as np
import pytest

from dimix.objective import build_problem


@pytest.fixture(scope="session")
def default_problem():
    """The n=20, d=25, N=100 regression instance used across test modules.

    Session-scoped because construction solves a d x d system and two
    eigenproblems; everything on the object is immutable.
    """
    return build_problem(seed=42)


def random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.uniform(0.01, 0.09, n)
    return p / p.sum()
