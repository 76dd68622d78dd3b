"""Closed-loop CDS indices of single-PCC microgrids and their pole verdicts.

Every system here shares one point of common coupling (PCC).  A *slack*
element (the grid impedance, or the series impedance of a grid-forming
inverter) sits in series with the parallel combination of the
grid-following output admittances and the load, so all indices share the
denominator ``1 + Z_slack * (sum Y_oc + Y_load)``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from typing import Literal, Sequence

from .errors import (
    DelayNotExpandedError,
    InvalidParametersError,
    IslandedWithoutFormerError,
    PathError,
    TopologyMismatchError,
)
from .inverters import (
    GRID_FOLLOWING,
    GRID_FORMING,
    GridFollowingParams,
    GridFormingParams,
    InverterEquivalent,
    InverterParams,
    equivalent,
)
from .tf import DEFAULT_PADE_ORDER, PoleSet, Polynomial, RationalTF, poly_roots

DEFAULT_BAND = 1e-3

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"
INCONCLUSIVE = "inconclusive"
VERDICTS = (STABLE, UNSTABLE, MARGINAL, INCONCLUSIVE)


@dataclass(frozen=True)
class GridModel:
    Rs: float
    Ls: float
    Vgrid_rms: float = 230.0

    def __post_init__(self):
        for name in ("Rs", "Ls"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParametersError(name, f"must be >= 0, got {v!r}")
        if not (math.isfinite(self.Vgrid_rms) and self.Vgrid_rms >= 0):
            raise InvalidParametersError("Vgrid_rms", f"must be >= 0, got {self.Vgrid_rms!r}")

    def impedance(self) -> RationalTF:
        return RationalTF(Polynomial([self.Rs, self.Ls]), [1.0])


@dataclass(frozen=True)
class MicrogridTopology:
    """Grid (or island), resistive load and the inverter roster, as parameters.

    Equivalents are built on demand so that a Padé order or a swept
    parameter can be changed without touching anything else.
    """

    mode: Literal["grid-connected", "islanded"]
    load_R: float
    inverters: tuple = ()
    grid: GridModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "inverters", tuple(self.inverters))
        if self.mode not in ("grid-connected", "islanded"):
            raise InvalidParametersError("mode", f"unknown mode {self.mode!r}")
        if not (math.isfinite(self.load_R) and self.load_R > 0):
            raise InvalidParametersError("load_R", f"must be > 0, got {self.load_R!r}")
        if (self.mode == "grid-connected") != (self.grid is not None):
            raise InvalidParametersError("grid", "a grid model is required iff the system is grid-connected")
        if not self.inverters:
            raise InvalidParametersError("inverters", "at least one inverter is required")
        for p in self.inverters:
            if not isinstance(p, (GridFollowingParams, GridFormingParams)):
                raise InvalidParametersError("inverters", f"not an inverter parameter set: {p!r}")
        if self.mode == "islanded" and not any(p.mode == GRID_FORMING for p in self.inverters):
            raise IslandedWithoutFormerError("an islanded microgrid needs a grid-forming inverter")

    @property
    def system_id(self) -> str:
        modes = [p.mode for p in self.inverters]
        n_gfm = modes.count(GRID_FORMING)
        if self.mode == "grid-connected":
            if modes == [GRID_FOLLOWING]:
                return "A1"
            if modes == [GRID_FORMING]:
                return "A2"
            if modes == [GRID_FOLLOWING, GRID_FOLLOWING]:
                return "B1"
        elif n_gfm == 1 and len(modes) == 2:
            return "B2"
        return "general"

    def with_value(self, path: str, value: float) -> "MicrogridTopology":
        return set_param(self, path, value)


# ---------------------------------------------------------------- parameter paths

_PATH_RE = re.compile(r"^(?:(grid|load)\.(\w+)|inverters?\[(\d+)\]\.(\w+)|(load_R))$")

_GRID_ALIASES = {"Rs": "Rs", "Rs_ohm": "Rs", "Ls": "Ls", "Ls_H": "Ls", "Vgrid_rms": "Vgrid_rms"}
_LOAD_ALIASES = {"R": "load_R", "R_ohm": "load_R"}
_GFL_ALIASES = {"L1_H": "L1", "R1_ohm": "R1", "C_F": "C", "L2_H": "L2", "R2_ohm": "R2", "Ts_s": "Ts"}
_GFM_ALIASES = {"kp": "kpv", "ki": "kiv", "L_H": "L", "RL_ohm": "RL", "C_F": "C", "Ts_s": "Ts"}


def _resolve(topology: MicrogridTopology, path: str):
    m = _PATH_RE.match(path.strip())
    if not m:
        raise PathError(path)
    scope, key, idx, ikey, load_r = m.groups()
    if load_r:
        return ("load", None, "load_R")
    if scope == "load":
        if key not in _LOAD_ALIASES:
            raise PathError(path)
        return ("load", None, "load_R")
    if scope == "grid":
        if topology.grid is None or key not in _GRID_ALIASES:
            raise PathError(path)
        return ("grid", None, _GRID_ALIASES[key])
    i = int(idx)
    if i >= len(topology.inverters):
        raise PathError(path, "inverter index out of range")
    p = topology.inverters[i]
    aliases = _GFL_ALIASES if isinstance(p, GridFollowingParams) else _GFM_ALIASES
    name = aliases.get(ikey, ikey)
    if name not in {f.name for f in dataclasses.fields(p)}:
        raise PathError(path)
    return ("inverter", i, name)


def get_param(topology: MicrogridTopology, path: str) -> float:
    scope, i, name = _resolve(topology, path)
    if scope == "load":
        return topology.load_R
    if scope == "grid":
        return getattr(topology.grid, name)
    return getattr(topology.inverters[i], name)


def set_param(topology: MicrogridTopology, path: str, value: float) -> MicrogridTopology:
    """Copy of ``topology`` with one scalar replaced; invariants re-checked."""
    scope, i, name = _resolve(topology, path)
    value = float(value)
    if scope == "load":
        return dataclasses.replace(topology, load_R=value)
    if scope == "grid":
        return dataclasses.replace(topology, grid=dataclasses.replace(topology.grid, **{name: value}))
    invs = list(topology.inverters)
    invs[i] = dataclasses.replace(invs[i], **{name: value})
    return dataclasses.replace(topology, inverters=tuple(invs))


# ---------------------------------------------------------------- compositions


def _require(inv: InverterEquivalent, mode: str, what: str):
    if inv.mode != mode:
        raise TopologyMismatchError(f"{what} must be {mode}, got {inv.mode}")


def _load_admittance(load_R: float) -> RationalTF:
    if not load_R > 0:
        raise InvalidParametersError("load_R", "must be > 0")
    return RationalTF.constant(1.0 / load_R) if math.isfinite(load_R) else RationalTF.constant(0.0)


def compose_a1(grid: GridModel, inv: InverterEquivalent, load_R: float) -> dict:
    """CDS_1 (from V_grid) and CDS_2 (from I_ref1) of one grid-following inverter on a grid."""
    _require(inv, GRID_FOLLOWING, "inverter")
    zg = grid.impedance()
    den = 1 + zg * inv.immitance_tf + zg * _load_admittance(load_R)
    inv_den = 1 / den
    return {"CDS_1": inv_den, "CDS_2": inv.source_tf * zg * inv_den}


def compose_a2(grid: GridModel, inv: InverterEquivalent, load_R: float) -> dict:
    """CDS_3 (from V_grid) and CDS_4 (from V_ref) of one grid-forming inverter on a grid."""
    _require(inv, GRID_FORMING, "inverter")
    zg = grid.impedance()
    y_ov = 1 / inv.immitance_tf
    den = 1 + zg * y_ov + zg * _load_admittance(load_R)
    inv_den = 1 / den
    return {"CDS_3": inv_den, "CDS_4": inv.source_tf * inv_den}


def compose_b1(grid: GridModel, inv1: InverterEquivalent, inv2: InverterEquivalent, load_R: float) -> dict:
    _require(inv1, GRID_FOLLOWING, "inverter 1")
    _require(inv2, GRID_FOLLOWING, "inverter 2")
    zg = grid.impedance()
    den = 1 + zg * inv1.immitance_tf + zg * inv2.immitance_tf + zg * _load_admittance(load_R)
    inv_den = 1 / den
    return {
        "CDS_5": inv_den,
        "CDS_6": inv1.source_tf * zg * inv_den,
        "CDS_7": inv2.source_tf * zg * inv_den,
    }


def compose_b2(gfm: InverterEquivalent, gfl: InverterEquivalent, load_R: float) -> dict:
    """Islanded pair: CDS_8 (from V_ref) and CDS_9 (from I_ref1)."""
    if gfm.mode != GRID_FORMING:
        raise IslandedWithoutFormerError("islanded system needs a grid-forming inverter as first member")
    _require(gfl, GRID_FOLLOWING, "second inverter")
    z_ov = gfm.immitance_tf
    den = 1 + z_ov * gfl.immitance_tf + z_ov * _load_admittance(load_R)
    inv_den = 1 / den
    return {"CDS_8": gfm.source_tf * inv_den, "CDS_9": gfl.source_tf * z_ov * inv_den}


def compose_general(slack, followers: Sequence[InverterEquivalent], load_R: float) -> dict:
    """Indices for one slack element feeding N grid-following inverters.

    ``slack`` is a :class:`GridModel` or a grid-forming equivalent.  The
    first entry of the result is the slack-source index (``CDS_vgrid`` or
    ``CDS_vref``), followed by ``CDS_iref<k>`` for each follower (1-based).
    """
    if isinstance(slack, (list, tuple)):
        if len(slack) != 1:
            raise TopologyMismatchError(f"exactly one slack element is required, got {len(slack)}")
        slack = slack[0]
    if slack is None:
        raise TopologyMismatchError("exactly one slack element is required, got none")
    for k, f in enumerate(followers):
        if isinstance(f, GridModel) or f.mode != GRID_FOLLOWING:
            raise TopologyMismatchError(f"follower {k} must be a grid-following inverter")
    if isinstance(slack, GridModel):
        z = slack.impedance()
        source = None
    elif isinstance(slack, InverterEquivalent) and slack.mode == GRID_FORMING:
        z = slack.immitance_tf
        source = slack.source_tf
    else:
        raise TopologyMismatchError("slack must be a grid model or a grid-forming inverter")

    den = RationalTF.constant(1.0)
    for f in followers:
        den = den + z * f.immitance_tf
    den = den + z * _load_admittance(load_R)
    inv_den = 1 / den
    out = {}
    if source is None:
        out["CDS_vgrid"] = inv_den
    else:
        out["CDS_vref"] = source * inv_den
    for k, f in enumerate(followers, start=1):
        out[f"CDS_iref{k}"] = f.source_tf * z * inv_den
    return out


def compose(topology: MicrogridTopology, delay_order: int = DEFAULT_PADE_ORDER, **kw) -> dict:
    """Dispatch to the composition matching ``topology.system_id``.

    The first key of the returned dict is the index whose poles decide the
    system verdict.
    """
    eqs = [equivalent(p, delay_order, **kw) for p in topology.inverters]
    sid = topology.system_id
    if sid == "A1":
        return compose_a1(topology.grid, eqs[0], topology.load_R)
    if sid == "A2":
        return compose_a2(topology.grid, eqs[0], topology.load_R)
    if sid == "B1":
        return compose_b1(topology.grid, eqs[0], eqs[1], topology.load_R)
    if sid == "B2":
        gfm = next(e for e in eqs if e.mode == GRID_FORMING)
        gfl = next(e for e in eqs if e.mode == GRID_FOLLOWING)
        return compose_b2(gfm, gfl, topology.load_R)
    formers = [e for e in eqs if e.mode == GRID_FORMING]
    followers = [e for e in eqs if e.mode == GRID_FOLLOWING]
    slacks = ([topology.grid] if topology.grid is not None else []) + formers
    return compose_general(slacks, followers, topology.load_R)


# ---------------------------------------------------------------- assessment


@dataclass(frozen=True)
class CdsAssessment:
    index_id: str
    tf: RationalTF
    poles: PoleSet
    max_real: float
    verdict: str


def verdict_from_max_real(max_real: float, band: float = DEFAULT_BAND) -> str:
    if max_real > band:
        return UNSTABLE
    if max_real < -band:
        return STABLE
    return MARGINAL


def assess(cds_tf: RationalTF, threshold_band: float = DEFAULT_BAND, index_id: str = "CDS") -> CdsAssessment:
    """Pole verdict from the roots of the (unreduced) denominator."""
    if cds_tf.delay:
        raise DelayNotExpandedError("assess needs a rational transfer function; expand the delay first")
    if not threshold_band >= 0:
        raise InvalidParametersError("threshold_band", "must be >= 0")
    if cds_tf.den.degree < 1:
        poles = PoleSet((), 0.0)
    else:
        poles = poly_roots(cds_tf.den)
    mr = poles.max_real
    return CdsAssessment(index_id, cds_tf, poles, mr, verdict_from_max_real(mr, threshold_band))


@dataclass(frozen=True)
class SystemAssessment:
    system_id: str
    primary: str
    indices: dict
    delay_order: int

    @property
    def verdict(self) -> str:
        return self.indices[self.primary].verdict

    @property
    def max_real(self) -> float:
        return self.indices[self.primary].max_real


def analyze(
    topology: MicrogridTopology,
    delay_order: int = DEFAULT_PADE_ORDER,
    threshold_band: float = DEFAULT_BAND,
    *,
    all_indices: bool = True,
) -> SystemAssessment:
    cds = compose(topology, delay_order)
    primary = next(iter(cds))
    keys = list(cds) if all_indices else [primary]
    indices = {k: assess(cds[k], threshold_band, k) for k in keys}
    return SystemAssessment(topology.system_id, primary, indices, delay_order)


@dataclass(frozen=True)
class RobustnessReport:
    orders: tuple
    verdicts: tuple
    max_reals: tuple
    flagged: bool = field(default=False)

    def rows(self):
        return list(zip(self.orders, self.verdicts, self.max_reals))


def robustness_check(
    topology: MicrogridTopology,
    orders: Sequence[int] = (4, 5, 6, 7, 8),
    threshold_band: float = DEFAULT_BAND,
) -> RobustnessReport:
    """Re-assess the deciding index at several Padé orders; flag disagreement."""
    orders = tuple(int(o) for o in orders)
    if not orders or any(o < 1 for o in orders):
        raise InvalidParametersError("orders", "need at least one Padé order, each >= 1")
    results = [analyze(topology, o, threshold_band, all_indices=False) for o in orders]
    verdicts = tuple(r.verdict for r in results)
    return RobustnessReport(orders, verdicts, tuple(r.max_real for r in results), len(set(verdicts)) > 1)
