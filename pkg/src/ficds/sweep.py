"""Parameter sweeps and bisection for the stability boundary."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AmbiguousEndpointError, FicdsError, InvalidParametersError, NoBoundaryError
from .tf import DEFAULT_PADE_ORDER
from .topology import DEFAULT_BAND, MARGINAL, STABLE, UNSTABLE, MicrogridTopology, analyze, get_param, set_param


@dataclass(frozen=True)
class SweepSpec:
    """A scalar parameter path and the values it takes.

    ``values`` is either an explicit sequence or a ``(lo, hi, count)`` tuple
    passed as ``grid``.
    """

    param_path: str
    values: tuple

    def __init__(self, param_path: str, values: Sequence[float] | None = None, *, grid: tuple | None = None):
        if (values is None) == (grid is None):
            raise InvalidParametersError("values", "give either explicit values or a (lo, hi, count) grid")
        if grid is not None:
            lo, hi, count = grid
            if int(count) != count or count < 1:
                raise InvalidParametersError("values", "grid count must be a positive integer")
            values = np.linspace(float(lo), float(hi), int(count)).tolist()
        vals = tuple(float(v) for v in values)
        if not vals:
            raise InvalidParametersError("values", "at least one value is required")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParametersError("values", "all values must be finite")
        object.__setattr__(self, "param_path", param_path)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepRow:
    value: float
    max_real: float | None
    verdict: str | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    param_path: str
    rows: tuple
    boundary_bracket: tuple | None

    @property
    def verdicts(self) -> list:
        return [r.verdict for r in self.rows]


def _bracket(rows) -> tuple | None:
    """First adjacent (stable, unstable) or (unstable, stable) pair."""
    for a, b in zip(rows, rows[1:]):
        if {a.verdict, b.verdict} == {STABLE, UNSTABLE}:
            return (a.value, b.value)
    return None


def _point(topology, path, value, delay_order, band) -> SweepRow:
    try:
        res = analyze(set_param(topology, path, value), delay_order, band, all_indices=False)
    except InvalidParametersError as exc:
        return SweepRow(value, None, None, str(exc))
    return SweepRow(value, res.max_real, res.verdict)


def sweep(
    topology: MicrogridTopology,
    spec: SweepSpec,
    delay_order: int = DEFAULT_PADE_ORDER,
    band: float = DEFAULT_BAND,
    *,
    workers: int | None = None,
) -> SweepResult:
    """Assess the topology at every value of ``spec``.

    Points are independent and run on a thread pool (``workers=1`` runs them
    in sequence); rows come back in input order either way.  A value that
    breaks a parameter invariant yields a row with ``error`` set and the
    sweep carries on.
    """
    get_param(topology, spec.param_path)  # path errors surface before any work

    def run(v):
        return _point(topology, spec.param_path, v, delay_order, band)

    if workers == 1 or len(spec.values) == 1:
        rows = [run(v) for v in spec.values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, spec.values))
    return SweepResult(spec.param_path, tuple(rows), _bracket(rows))


@dataclass(frozen=True)
class Boundary:
    """Result of a bisection.

    ``value`` is the midpoint of the final bracket ``(lo, hi)``, whose ends
    carry ``lo_verdict`` and ``hi_verdict``.  If a midpoint came out
    marginal the search stops there and ``marginal`` is True.
    """

    value: float
    lo: float
    hi: float
    lo_verdict: str
    hi_verdict: str
    iterations: int
    marginal: bool = False


def bisect_verdict(fn: Callable[[float], str], lo: float, hi: float, tol: float = 1e-3, max_iter: int = 200) -> Boundary:
    """Bisect on a verdict-valued function until ``hi - lo <= tol * |hi|``."""
    if not tol > 0:
        raise InvalidParametersError("tol", "must be > 0")
    v_lo, v_hi = fn(lo), fn(hi)
    if MARGINAL in (v_lo, v_hi):
        raise AmbiguousEndpointError(f"marginal verdict at an endpoint ({lo!r}: {v_lo}, {hi!r}: {v_hi})")
    if v_lo == v_hi:
        raise NoBoundaryError(f"both endpoints are {v_lo}; supply a bracket with opposite verdicts")
    it = 0
    while abs(hi - lo) > tol * abs(hi) and it < max_iter:
        mid = 0.5 * (lo + hi)
        v = fn(mid)
        it += 1
        if v == MARGINAL:
            return Boundary(mid, lo, hi, v_lo, v_hi, it, marginal=True)
        if v == v_lo:
            lo = mid
        else:
            hi = mid
    return Boundary(0.5 * (lo + hi), lo, hi, v_lo, v_hi, it)


def find_boundary(
    topology: MicrogridTopology,
    param_path: str,
    lo: float,
    hi: float,
    tol: float = 1e-3,
    delay_order: int = DEFAULT_PADE_ORDER,
    band: float = DEFAULT_BAND,
) -> Boundary:
    """Critical value of ``param_path`` between ``lo`` and ``hi``.

    The caller supplies a bracket with opposite verdicts; stability regions
    need not be monotone, so nothing outside it is assumed.
    """
    get_param(topology, param_path)

    def fn(v):
        try:
            return analyze(set_param(topology, param_path, v), delay_order, band, all_indices=False).verdict
        except InvalidParametersError as exc:
            raise FicdsError(f"{param_path}={v!r} is not a valid parameter value: {exc}") from exc

    return bisect_verdict(fn, lo, hi, tol)
