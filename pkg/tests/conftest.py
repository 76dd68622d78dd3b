import math

import numpy as np
import pytest
from hypothesis import settings

from ficds.table1 import GRID_LS, GRID_RS, INVERTER_1, INVERTER_2, INVERTER_3, LOAD_R, VGRID_RMS
from ficds.topology import GridModel, MicrogridTopology

settings.register_profile("ficds", max_examples=60, deadline=None)
settings.load_profile("ficds")

# 10 log-spaced sample frequencies in [1, 1e5] rad/s
OMEGAS = np.logspace(0, 5, 10)


def table1_grid(Ls=GRID_LS):
    return GridModel(GRID_RS, Ls, VGRID_RMS)


def system(sid):
    """Nominal topology of one of the four studied systems."""
    if sid == "A1":
        return MicrogridTopology("grid-connected", LOAD_R, (INVERTER_1,), table1_grid())
    if sid == "A2":
        return MicrogridTopology("grid-connected", LOAD_R, (INVERTER_3,), table1_grid())
    if sid == "B1":
        return MicrogridTopology("grid-connected", LOAD_R, (INVERTER_1, INVERTER_2), table1_grid())
    if sid == "B2":
        return MicrogridTopology("islanded", LOAD_R, (INVERTER_1, INVERTER_3), None)
    raise KeyError(sid)


# (system, parameter path, value) of the cross-method matrix
MATRIX = [
    ("A1", "inverter[0].kp", 7.0),
    ("A1", "inverter[0].kp", 7.5),
    ("A1", "grid.Ls", 0.5e-3),
    ("A1", "grid.Ls", 5e-3),
    ("A2", "grid.Ls", 0.3e-3),
    ("A2", "grid.Ls", 5e-3),
    ("B1", "inverter[0].kp", 6.0),
    ("B1", "inverter[0].kp", 6.5),
    ("B1", "inverter[0].kp", 7.0),
    ("B2", "inverter[0].kp", 5.0),
    ("B2", "inverter[0].kp", 9.5),
    ("B2", "inverter[1].kpv", 0.2),
]


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)))


@pytest.fixture
def w1():
    return 2 * math.pi * 50.0
