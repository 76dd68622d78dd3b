"""Converter-driven stability analysis of small inverter microgrids.

Rational transfer-function core, inverter equivalents, CDS-index
composition and pole verdicts, parameter sweeps, and a time-domain
simulator used as an independent check.
"""

from .errors import (
    AmbiguousEndpointError,
    ConfigError,
    DelayNotExpandedError,
    FicdsError,
    InsufficientDataError,
    InvalidParametersError,
    IslandedWithoutFormerError,
    NoBoundaryError,
    PathError,
    PoleHitError,
    RootFindingError,
    TopologyMismatchError,
)
from .inverters import GridFollowingParams, GridFormingParams, InverterEquivalent, equivalent, gfl_equivalent, gfm_equivalent
from .sim import Event, SimConfig, SimTrace, Simulator, classify, scenario_b, segment_verdicts, simulate
from .sweep import SweepSpec, bisect_verdict, find_boundary, sweep
from .tf import Polynomial, PoleSet, RationalTF, expand_delay, freq_response, pade_delay, poly_roots, reduce
from .topology import GridModel, MicrogridTopology, analyze, assess, compose, robustness_check, set_param

__version__ = "0.1.0"
