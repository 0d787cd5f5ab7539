import numpy as np
import pytest

from llmadapt.dynamics import VehicleState
from llmadapt.mission import ReferencePoint


def state_with_error(errors, ref_position=(0.0, 0.0, 1.0)):
    """State offset from a hover reference by ``errors`` (x, y, z)."""
    ref = ReferencePoint.hold(ref_position)
    return VehicleState(ref.position_ref + np.asarray(errors, dtype=float), np.zeros(3)), ref


@pytest.fixture
def hover_ref():
    return ReferencePoint.hold((0.0, 0.0, 1.0))
