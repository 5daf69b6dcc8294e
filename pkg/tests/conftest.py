import numpy as np
import pytest

from dbsurf.bench import toy_objective

P_GRID = np.round(np.arange(1, 10) / 10, 10)


@pytest.fixture
def toy_f():
    return toy_objective(0.49)
