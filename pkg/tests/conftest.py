import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hexgait import model


def _planar_leg(l1=1.0, l2=1.0, lo=-np.pi, hi=np.pi):
    joints = [model.JointSpec("shoulder", lo, hi, 10.0),
              model.JointSpec("elbow", lo, hi, 10.0)]
    dh = [model.DHParam(0.0, 0.0, l1, 0.0), model.DHParam(0.0, 0.0, l2, 0.0)]
    return model.LegSpec(1, (0, 0, 0), (0, 0, 0), joints, dh,
                         (l1 + l2 * 0.5, 0.0, 0.0))


@pytest.fixture
def planar_leg():
    return _planar_leg()


@pytest.fixture(scope="session")
def planar_robot():
    return model.packaged_robot("planar")


@pytest.fixture(scope="session")
def insectoid():
    return model.packaged_robot("hexapod_sprawled")


@pytest.fixture(scope="session")
def mammalian():
    return model.packaged_robot("hexapod_under")


@pytest.fixture(scope="session")
def hexapod_mini():
    return model.packaged_robot("hexapod_mini")


@pytest.fixture(scope="session")
def gaits():
    return {g.name: g for g in model.default_gait_library()}
