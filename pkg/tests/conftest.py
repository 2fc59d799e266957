import json

import numpy as np
import pytest

from polyapprox.models import Polytope, TrainConfig
from polyapprox.region_types import DiskDifferenceRegion, HypercubeRegion, HypersphereRegion


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def box_rows():
    return np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@pytest.fixture
def unit_square(box_rows):
    """[0, 1]^2 as a polytope."""
    return Polytope.unscaled(box_rows, [1.0, 0.0, 1.0, 0.0])


@pytest.fixture
def square_region():
    return HypercubeRegion([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def unit_disk():
    return HypersphereRegion([0.0, 0.0], 1.0)


@pytest.fixture
def cut_disk():
    return DiskDifferenceRegion([0.0, 0.0], 1.0, [1.0, 0.0], 0.5)


@pytest.fixture
def quick_config():
    return TrainConfig(phases=[(0.5, 20)], batch=2, eval_every=10, eval_dirs=10, seed=3)


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return _write
