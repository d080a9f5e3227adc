import numpy as np
import pytest

# Integer basis of the plain square grid in the plane: columns (3,1) and
# (5,2), determinant 1.  Small enough to trace by hand, skew enough to
# make the greedy solver miss the optimum.
WORKED = np.array([[3.0, 5.0], [1.0, 2.0]])


@pytest.fixture
def worked_basis() -> np.ndarray:
    return WORKED.copy()


@pytest.fixture
def make_instance():
    """Seeded random (X, w) generator: k x n uniform[-1, 1] calibration
    plus a weight row."""

    def _make(seed: int, n: int | None = None, k: int | None = None,
              n_max: int = 8, k_extra: int = 8):
        rng = np.random.default_rng(seed)
        if n is None:
            n = int(rng.integers(2, n_max + 1))
        if k is None:
            k = n + int(rng.integers(0, k_extra + 1))
        return rng.uniform(-1.0, 1.0, (k, n)), rng.uniform(-1.0, 1.0, n)

    return _make
