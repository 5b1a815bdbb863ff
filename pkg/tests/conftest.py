import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ivlingam.core import Dataset, Role
from ivlingam.simulate import SimulationSpec, generate


@pytest.fixture
def valid_dataset() -> Dataset:
    """Strong instrument, exclusion restriction holds."""
    return generate(SimulationSpec(n=500, alpha_zy=0.0, seed=101))


@pytest.fixture
def violation_dataset() -> Dataset:
    """Strong instrument with a 0.3 direct instrument-outcome effect."""
    return generate(SimulationSpec(n=500, alpha_zy=0.3, seed=101))


def make_dataset(z, x, y) -> Dataset:
    return Dataset(
        columns={"z": np.asarray(z, float), "x": np.asarray(x, float), "y": np.asarray(y, float)},
        roles={"z": Role.INSTRUMENT, "x": Role.TREATMENT, "y": Role.OUTCOME},
    )
