import numpy as np
import pytest

from demforge import ElevationGrid, GridGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_grid(cells, res=0.04):
    cells = np.asarray(cells, dtype=np.float32)
    return ElevationGrid(GridGeometry(*cells.shape, res, res), cells)


def random_grid(rng, rows=8, cols=8, nan_prob=0.0, scale=1.0):
    cells = rng.uniform(0.0, scale, size=(rows, cols)).astype(np.float32)
    if nan_prob > 0.0:
        cells[rng.random((rows, cols)) < nan_prob] = np.nan
    return make_grid(cells)
