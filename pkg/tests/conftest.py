import math

import pytest

from xdiff.discretize import Grid
from xdiff.fom import SimulationConfig
from xdiff.models import ReactionModel


@pytest.fixture
def schnakenberg_small():
    return SimulationConfig(
        grid=Grid((0.5, 0.5), (5, 4)),
        reaction=ReactionModel("schnakenberg", 0.25, 0.3, 200.0),
        d_u=1.0, d_v=1.0, d_uv=math.nan, d_vu=1.0,
        dt=0.001, t_final=0.01, study_parameter="d_uv", seed=7,
    )


@pytest.fixture
def brusselator_small():
    return SimulationConfig(
        grid=Grid((20.0, 20.0, 20.0), (4, 4, 4)),
        reaction=ReactionModel("brusselator", 6.0, 1.0),
        d_u=0.4, d_v=2.0, d_uv=0.02, d_vu=math.nan,
        dt=0.01, t_final=0.1, study_parameter="d_vu", seed=3,
    )
