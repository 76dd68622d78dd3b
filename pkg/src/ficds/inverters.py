"""Small-signal Norton/Thevenin equivalents of PR-controlled inverters.

Every transfer function is assembled directly in polynomial form: the
capacitor impedance ``1/(sC)``, the PR denominator ``s^2 + w1^2`` and the
Padé denominator are cleared analytically instead of being left for
numerical cancellation.  That keeps spurious poles at ``s = 0`` and
``s = +-j*w1`` out of the closed-loop indices and makes the resonance
identities (``G_c(j w1) = 1``, ``Y_oc(j w1) = 0``, ...) structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Literal, Union

from .errors import InvalidParametersError
from .tf import DEFAULT_PADE_ORDER, Polynomial, RationalTF, pade_delay

GRID_FOLLOWING = "grid-following"
GRID_FORMING = "grid-forming"

DELAY_PERIODS = 1.5


def _check(obj, positive=(), nonnegative=()):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise InvalidParametersError(f.name, f"must be a finite number, got {v!r}")
    for name in positive:
        if not getattr(obj, name) > 0:
            raise InvalidParametersError(name, f"must be > 0, got {getattr(obj, name)!r}")
    for name in nonnegative:
        if not getattr(obj, name) >= 0:
            raise InvalidParametersError(name, f"must be >= 0, got {getattr(obj, name)!r}")


@dataclass(frozen=True)
class GridFollowingParams:
    """PR current control with an LCL filter (SI units throughout)."""

    kp: float
    ki: float
    omega1: float
    Ts: float
    L1: float
    R1: float
    C: float
    L2: float
    R2: float

    def __post_init__(self):
        _check(self, positive=("L1", "C", "L2", "Ts", "omega1"), nonnegative=("kp", "ki", "R1", "R2"))

    @property
    def mode(self) -> str:
        return GRID_FOLLOWING


@dataclass(frozen=True)
class GridFormingParams:
    """PR voltage loop around a proportional inner current loop, LC filter."""

    kpv: float
    kiv: float
    kpc: float
    omega1: float
    Ts: float
    L: float
    RL: float
    C: float

    def __post_init__(self):
        _check(self, positive=("L", "C", "Ts", "omega1"), nonnegative=("kpv", "kiv", "kpc", "RL"))

    @property
    def mode(self) -> str:
        return GRID_FORMING


InverterParams = Union[GridFollowingParams, GridFormingParams]


@dataclass(frozen=True)
class InverterEquivalent:
    """Norton (current source + shunt Y_oc) or Thevenin (voltage source + series Z_ov) model.

    ``source_tf`` is G_c or G_v; ``immitance_tf`` is Y_oc in siemens or Z_ov in ohms.
    """

    mode: Literal["grid-following", "grid-forming"]
    source_tf: RationalTF
    immitance_tf: RationalTF
    params: InverterParams | None = None


def _pr_parts(kp, ki, omega1):
    """Numerator and denominator of ``kp + ki*s/(s^2 + w1^2)``."""
    w2 = omega1 * omega1
    return Polynomial([kp * w2, ki, kp]), Polynomial([w2, 0.0, 1.0])


def _delay_parts(tau, order):
    d = pade_delay(tau, order)
    return d.num, d.den


def gfl_equivalent(p: GridFollowingParams, delay_order: int = DEFAULT_PADE_ORDER, *, delay: float | None = None) -> InverterEquivalent:
    """Y_oc = I_g/V_pcc and G_c = I_g/I_ref of the grid-following inverter.

    With Z_L1 = R1 + sL1, Z_L2 = R2 + sL2 and Z_c = 1/(sC), numerator and
    denominator of both are multiplied by ``sC * (s^2+w1^2) * D_d(s)``::

        den  = (Z_L1 + Z_L2 + sC Z_L1 Z_L2) (s^2+w1^2) D_d + N_pr N_d
        Y_oc = (1 + sC Z_L1) (s^2+w1^2) D_d / den
        G_c  = N_pr N_d / den

    ``delay`` overrides the 1.5*Ts computation/PWM delay (0 gives the
    delay-free model).
    """
    if int(delay_order) != delay_order or delay_order < 1:
        raise InvalidParametersError("delay_order", "must be a positive integer")
    tau = DELAY_PERIODS * p.Ts if delay is None else delay
    n_pr, d_pr = _pr_parts(p.kp, p.ki, p.omega1)
    n_d, d_d = _delay_parts(tau, delay_order)
    z1 = Polynomial([p.R1, p.L1])
    z2 = Polynomial([p.R2, p.L2])
    sc = Polynomial([0.0, p.C])
    passive = z1 + z2 + sc * z1 * z2
    den = passive * d_pr * d_d + n_pr * n_d
    y_oc = RationalTF((1.0 + sc * z1) * d_pr * d_d, den)
    g_c = RationalTF(n_pr * n_d, den)
    return InverterEquivalent(GRID_FOLLOWING, g_c, y_oc, p)


def gfm_equivalent(
    p: GridFormingParams,
    delay_order: int = DEFAULT_PADE_ORDER,
    *,
    delay: float | None = None,
    form: Literal["derived", "printed"] = "derived",
) -> InverterEquivalent:
    """Z_ov = V_pcc/I_g and G_v = V_pcc/V_ref of the grid-forming inverter.

    Solving the loop equations

        (V_ref - V_c) G_pr = I_ref,   (I_ref - i_L) G_p G_d = V_pwm,
        (V_pwm - V_c) / Z_L = i_L,    i_L = V_c / Z_c + I_g

    gives a common denominator ``Z_L + G_p G_d + Z_c + Z_c G_pr G_p G_d``.
    ``form="printed"`` instead uses ``Z_L + Z_c + G_pr G_p G_d + G_p G_d``,
    which drops the Z_c factor on the voltage-loop term; it is kept only for
    comparison.  After clearing ``sC (s^2+w1^2) D_d``::

        X    = kpc N_d + Z_L D_d
        den  = (sC X + D_d)(s^2+w1^2) + kpc N_pr N_d          (derived)
        Z_ov = X (s^2+w1^2) / den
        G_v  = kpc N_pr N_d / den
    """
    if int(delay_order) != delay_order or delay_order < 1:
        raise InvalidParametersError("delay_order", "must be a positive integer")
    tau = DELAY_PERIODS * p.Ts if delay is None else delay
    n_pr, d_pr = _pr_parts(p.kpv, p.kiv, p.omega1)
    n_d, d_d = _delay_parts(tau, delay_order)
    zl = Polynomial([p.RL, p.L])
    sc = Polynomial([0.0, p.C])
    x = p.kpc * n_d + zl * d_d
    if form == "derived":
        den = (sc * x + d_d) * d_pr + p.kpc * n_pr * n_d
    elif form == "printed":
        den = (sc * x + d_d) * d_pr + sc * (p.kpc * n_pr * n_d)
    else:
        raise InvalidParametersError("form", f"unknown grid-forming formula variant {form!r}")
    z_ov = RationalTF(x * d_pr, den)
    g_v = RationalTF(p.kpc * n_pr * n_d, den)
    return InverterEquivalent(GRID_FORMING, g_v, z_ov, p)


def equivalent(p: InverterParams, delay_order: int = DEFAULT_PADE_ORDER, **kw) -> InverterEquivalent:
    if isinstance(p, GridFollowingParams):
        return gfl_equivalent(p, delay_order, **kw)
    if isinstance(p, GridFormingParams):
        return gfm_equivalent(p, delay_order, **kw)
    raise TypeError(f"not an inverter parameter set: {type(p).__name__}")
