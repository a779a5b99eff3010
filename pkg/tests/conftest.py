import numpy as np
import pytest

from hiddenfactor.population import PotentialOutcomesTable, build_table

# Four-unit worked example used throughout: rows are units, columns the
# canonical cells (-1,-1), (+1,-1), (-1,+1), (+1,+1).
T4_ROWS = [
    [0.0, 2.0, 1.0, 5.0],
    [1.0, 3.0, 2.0, 6.0],
    [0.0, 1.0, 1.0, 3.0],
    [1.0, 4.0, 0.0, 6.0],
]


@pytest.fixture
def t4() -> PotentialOutcomesTable:
    return build_table(np.array(T4_ROWS))


def random_table(rng: np.random.Generator, n: int, scale: float = 1.0):
    return build_table(scale * rng.normal(size=(n, 4)))


def additive_table(rng: np.random.Generator, n: int, offsets=(1.0, 4.0, 2.5, 9.0)):
    """Strictly additive table: shared unit noise plus fixed cell offsets."""
    base = rng.normal(size=n)
    return build_table(base[:, None] + np.asarray(offsets, dtype=float)[None, :])
