"""Nominal parameter sets of the four studied microgrids (SI units)."""

import math

from .inverters import GridFollowingParams, GridFormingParams

F_SYSTEM = 50.0
OMEGA1 = 2 * math.pi * F_SYSTEM
TS = 1.0 / 10e3

INVERTER_1 = GridFollowingParams(kp=7.0, ki=1000.0, omega1=OMEGA1, Ts=TS, L1=1.2e-3, R1=0.1, C=15e-6, L2=0.3e-3, R2=0.2)
INVERTER_2 = GridFollowingParams(kp=5.0, ki=1000.0, omega1=OMEGA1, Ts=TS, L1=1.5e-3, R1=0.1, C=15e-6, L2=0.5e-3, R2=0.2)
INVERTER_3 = GridFormingParams(kpv=0.1, kiv=100.0, kpc=5.0, omega1=OMEGA1, Ts=TS, L=1.5e-3, RL=0.1, C=28e-6)

GRID_RS = 0.4
GRID_LS = 0.3e-3
VGRID_RMS = 230.0
LOAD_R = 100.0
