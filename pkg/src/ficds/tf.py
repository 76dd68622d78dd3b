"""Real-coefficient polynomials and rational transfer functions in s.

Coefficients are stored in ascending powers of s.  A :class:`RationalTF`
may carry a symbolic pure delay ``exp(-delay*s)`` that is kept unexpanded
until :func:`expand_delay` replaces it with a diagonal Padé approximant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DelayNotExpandedError, InvalidParametersError, PoleHitError, RootFindingError

__all__ = [
    "Polynomial",
    "RationalTF",
    "PoleSet",
    "rational_add",
    "rational_mul",
    "rational_inv",
    "pade_delay",
    "expand_delay",
    "poly_roots",
    "freq_response",
    "reduce",
    "reduction_error",
]

DEFAULT_PADE_ORDER = 5
_EPS = np.finfo(float).eps


class Polynomial:
    """Dense polynomial with real coefficients, ascending powers."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable[float] | "Polynomial"):
        if isinstance(coeffs, Polynomial):
            c = coeffs._c
        else:
            c = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise InvalidParametersError("coeffs", "polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1].copy() if nz.size else np.zeros(1)
        c.flags.writeable = False
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return len(self._c) - 1

    @property
    def lead(self) -> float:
        return float(self._c[-1])

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0.0

    def __call__(self, s):
        """Horner evaluation; ``s`` may be a complex scalar or array."""
        s = np.asarray(s)
        out = np.zeros_like(s, dtype=np.result_type(s, float)) + self._c[-1]
        for a in self._c[-2::-1]:
            out = out * s + a
        return out

    def __add__(self, other):
        other = _as_poly(other)
        return Polynomial(npoly.polyadd(self._c, other._c))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __neg__(self):
        return Polynomial(-self._c)

    def __mul__(self, other):
        other = _as_poly(other)
        return Polynomial(npoly.polymul(self._c, other._c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self._c, other._c)

    __hash__ = None

    def __repr__(self):
        return f"Polynomial({self._c.tolist()!r})"


def _as_poly(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, Real):
        return Polynomial([float(x)])
    return Polynomial(x)


@dataclass(frozen=True, eq=False)
class RationalTF:
    """``num(s)/den(s) * exp(-delay*s)`` with real-coefficient num and den."""

    num: Polynomial
    den: Polynomial
    delay: float = 0.0

    def __init__(self, num, den=1.0, delay: float = 0.0):
        num, den = _as_poly(num), _as_poly(den)
        if den.is_zero():
            raise ZeroDivisionError("transfer function denominator is identically zero")
        if not delay >= 0.0 or not math.isfinite(delay):
            raise InvalidParametersError("delay", "must be a finite nonnegative number of seconds")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "delay", float(delay))

    @classmethod
    def constant(cls, k: float) -> "RationalTF":
        return cls([k], [1.0])

    def normalized(self) -> "RationalTF":
        """Canonical form with a monic denominator."""
        lead = self.den.lead
        return RationalTF(self.num.coeffs / lead, self.den.coeffs / lead, self.delay)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        val = self.num(s) / self.den(s)
        if self.delay:
            val = val * np.exp(-self.delay * s)
        return val

    def __add__(self, other):
        return rational_add(self, _as_tf(other))

    def __radd__(self, other):
        return rational_add(_as_tf(other), self)

    def __sub__(self, other):
        return rational_add(self, -_as_tf(other))

    def __rsub__(self, other):
        return rational_add(_as_tf(other), -self)

    def __neg__(self):
        return RationalTF(-self.num, self.den, self.delay)

    def __mul__(self, other):
        return rational_mul(self, _as_tf(other))

    def __rmul__(self, other):
        return rational_mul(_as_tf(other), self)

    def __truediv__(self, other):
        return rational_mul(self, rational_inv(_as_tf(other)))

    def __rtruediv__(self, other):
        return rational_mul(_as_tf(other), rational_inv(self))

    def __repr__(self):
        tail = f", delay={self.delay!r}" if self.delay else ""
        return f"RationalTF({self.num.coeffs.tolist()!r}, {self.den.coeffs.tolist()!r}{tail})"


def _as_tf(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x, [1.0])
    if isinstance(x, Real):
        return RationalTF.constant(float(x))
    raise TypeError(f"cannot interpret {type(x).__name__} as a transfer function")


def rational_add(a: RationalTF, b: RationalTF) -> RationalTF:
    if a.delay or b.delay:
        raise DelayNotExpandedError("addition requires delay-free operands; call expand_delay first")
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if a.den == b.den:
        return RationalTF(a.num + b.num, a.den)
    return RationalTF(a.num * b.den + b.num * a.den, a.den * b.den)


def rational_mul(a: RationalTF, b: RationalTF) -> RationalTF:
    # exact zero stays 0/1 so a vanishing impedance contributes no poles
    if a.is_zero() or b.is_zero():
        return RationalTF([0.0], [1.0])
    return RationalTF(a.num * b.num, a.den * b.den, a.delay + b.delay)


def rational_inv(a: RationalTF) -> RationalTF:
    if a.delay:
        raise DelayNotExpandedError("cannot invert a transfer function carrying a pure delay")
    if a.is_zero():
        raise ZeroDivisionError("cannot invert a transfer function with zero numerator")
    return RationalTF(a.den, a.num)


def pade_delay(tau: float, order: int = DEFAULT_PADE_ORDER) -> RationalTF:
    """Diagonal [order/order] Padé approximant of ``exp(-tau*s)``."""
    if not tau >= 0.0:
        raise InvalidParametersError("tau", "must be nonnegative")
    if int(order) != order or order < 1:
        raise InvalidParametersError("order", "must be a positive integer")
    order = int(order)
    if tau == 0.0:
        return RationalTF([1.0], [1.0])
    n = order
    k = np.arange(n + 1)
    c = np.array(
        [
            math.factorial(2 * n - i) * math.factorial(n) / (math.factorial(2 * n) * math.factorial(i) * math.factorial(n - i))
            for i in k
        ]
    )
    return RationalTF(c * (-tau) ** k, c * tau**k)


def expand_delay(tf: RationalTF, order: int = DEFAULT_PADE_ORDER) -> RationalTF:
    if not tf.delay:
        return tf
    return rational_mul(RationalTF(tf.num, tf.den), pade_delay(tf.delay, order))


@dataclass(frozen=True)
class PoleSet:
    """Roots of a polynomial together with their worst relative residual."""

    roots: tuple
    residual_bound: float

    @property
    def max_real(self) -> float:
        if not self.roots:
            return -math.inf
        return max(r.real for r in self.roots)

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


def _horner_with_derivative(c: np.ndarray, z: np.ndarray):
    p = np.full_like(z, c[-1])
    dp = np.zeros_like(z)
    for a in c[-2::-1]:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def _newton_and_backward_error(q: np.ndarray, absq: np.ndarray, z: np.ndarray):
    """Newton correction p/p' and relative backward error at each z.

    Points outside the unit circle are evaluated through the reversed
    polynomial in 1/z so high degrees never overflow.
    """
    n = len(q) - 1
    ratio = np.empty_like(z)
    err = np.empty(z.shape)
    inner = np.abs(z) <= 1.0
    if inner.any():
        zi = z[inner]
        p, dp = _horner_with_derivative(q, zi)
        err[inner] = np.abs(p) / npoly.polyval(np.abs(zi), absq)
        ratio[inner] = p / np.where(dp == 0, _EPS, dp)
    outer = ~inner
    if outer.any():
        y = 1.0 / z[outer]
        r, dr = _horner_with_derivative(q[::-1], y)
        err[outer] = np.abs(r) / npoly.polyval(np.abs(y), absq[::-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = n - y * dr / r
            ratio[outer] = np.where(r == 0, 0.0, z[outer] / np.where(corr == 0, _EPS, corr))
    return ratio, err


def _initial_guesses(absq: np.ndarray) -> np.ndarray:
    """Starting points on circles whose radii come from the Newton polygon.

    The upper convex hull of ``(k, log|q_k|)`` splits the degree into groups
    of roots of comparable modulus; each group starts on its own circle.
    """
    n = len(absq) - 1
    with np.errstate(divide="ignore"):
        logs = np.log(absq)
    hull = []
    for k in (k for k in range(n + 1) if np.isfinite(logs[k])):
        while len(hull) >= 2:
            k1, k2 = hull[-2], hull[-1]
            # drop k2 when it lies on or below the chord k1 -> k
            if (logs[k2] - logs[k1]) * (k - k1) <= (logs[k] - logs[k1]) * (k2 - k1):
                hull.pop()
            else:
                break
        hull.append(k)
    z = []
    for k1, k2 in zip(hull[:-1], hull[1:]):
        m = k2 - k1
        radius = math.exp((logs[k1] - logs[k2]) / m)
        offset = 2 * math.pi * k1 / n + 0.4
        z.extend(radius * np.exp(1j * (2 * np.pi * np.arange(m) / m + offset)))
    return np.array(z, dtype=complex)


def _pair_conjugates(z: np.ndarray, q: np.ndarray, absq: np.ndarray, rtol: float = 1e-2) -> np.ndarray:
    """Snap a root set of a real polynomial onto exact conjugate symmetry.

    Roots of a multiplicity-m cluster are only accurate to about eps**(1/m),
    so partners are matched within ``rtol`` but a snap is kept only when the
    snapped points are still roots to rounding level (backward error).
    """
    z = z.copy()
    n = len(q) - 1
    _, err = _newton_and_backward_error(q, absq, z)
    limit = np.maximum(err, 4 * n * _EPS) * 16

    def ok(points, bound):
        return bool(np.all(_newton_and_backward_error(q, absq, np.asarray(points, dtype=complex))[1] <= bound))

    scale = np.maximum(np.abs(z), np.finfo(float).tiny)
    used = np.abs(z.imag) <= 1e-8 * scale
    z[used] = z[used].real
    upper = np.flatnonzero(~used & (z.imag > 0))
    lower = np.flatnonzero(~used & (z.imag < 0))
    if upper.size and lower.size:
        # closest pairs first, so one cluster member cannot steal another's partner
        dist = np.abs(z[upper][:, None] - np.conj(z[lower])[None, :]) / scale[upper][:, None]
        for flat in np.argsort(dist, axis=None, kind="stable"):
            a, b = divmod(int(flat), lower.size)
            if dist[a, b] > rtol:
                break
            i, j = upper[a], lower[b]
            if used[i] or used[j]:
                continue
            m = 0.5 * (z[i] + np.conj(z[j]))
            if ok([m], max(limit[i], limit[j])):
                z[i], z[j] = m, np.conj(m)
                used[i] = used[j] = True
    # leftover members of real clusters
    for i in np.flatnonzero(~used & (np.abs(z.imag) <= rtol * scale)):
        if ok([z[i].real], limit[i]):
            z[i] = z[i].real
    return z


def poly_roots(p, *, max_iter: int = 200, tol: float = 1e-12) -> PoleSet:
    """All complex roots of ``p`` by Aberth-Ehrlich simultaneous iteration.

    The polynomial is made monic and rescaled with ``s = sigma*z`` where
    ``sigma = |a0/an|**(1/n)`` (the geometric mean of the root moduli), which
    brings coefficients that mix H, F and ohm magnitudes back to order one.
    Exact zero roots are split off before iterating.

    ``residual_bound`` is the largest ``|q(z)| / sum_k |q_k| |z|^k`` over the
    scaled roots, i.e. the relative backward error of the worst root.
    """
    p = _as_poly(p)
    if p.degree < 1:
        raise InvalidParametersError("p", "root finding needs a polynomial of degree >= 1")
    c = p.coeffs
    nzero = int(np.flatnonzero(c)[0])
    c = c[nzero:]
    n = len(c) - 1
    if n == 0:
        return PoleSet(tuple(complex(0.0) for _ in range(nzero)), 0.0)

    a = c / c[-1]
    log_sigma = math.log(abs(a[0])) / n
    sigma = math.exp(log_sigma)
    q = a * np.exp(-(n - np.arange(n + 1)) * log_sigma)
    absq = np.abs(q)

    if n == 1:
        z = np.array([-q[0] + 0j])
        resid = 0.0
    else:
        z = _initial_guesses(absq)
        active = np.ones(n, dtype=bool)
        for _ in range(max_iter):
            ratio, err = _newton_and_backward_error(q, absq, z)
            active &= ~(err <= 4 * n * _EPS)
            if not active.any():
                break
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (1.0 / diff).sum(axis=1)
                w = ratio / (1.0 - ratio * s)
            w = np.where(active & np.isfinite(w), w, 0.0)
            z = z - w
            active &= ~(np.abs(w) <= tol * np.maximum(np.abs(z), 1.0))
            if not active.any():
                break
        else:
            raise RootFindingError(f"Aberth iteration did not converge in {max_iter} iterations (degree {n})")
        if not np.all(np.isfinite(z)):
            raise RootFindingError("Aberth iteration produced non-finite roots")
        z = _pair_conjugates(z, q, absq)
        _, err = _newton_and_backward_error(q, absq, z)
        resid = float(np.max(err))

    roots = np.concatenate([np.zeros(nzero, dtype=complex), z * sigma])
    order = np.lexsort((roots.imag, roots.real))
    return PoleSet(tuple(complex(r) for r in roots[order]), resid)


def freq_response(tf: RationalTF, omegas: Sequence[float]) -> np.ndarray:
    """``tf(j*omega)`` for each omega, with any delay applied exactly."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    s = 1j * w
    den = tf.den(s)
    hit = np.flatnonzero(den == 0)
    if hit.size:
        raise PoleHitError(float(w[hit[0]]))
    return tf.num(s) / den * np.exp(-tf.delay * s)


def reduce(tf: RationalTF, tol: float) -> RationalTF:
    """Cancel numerator/denominator roots closer than ``tol`` (relative).

    Never used on the stability path: a cancelled unstable pole would be
    hidden from the verdict.
    """
    if tol < 0:
        raise InvalidParametersError("tol", "must be nonnegative")
    if tol == 0 or tf.num.degree < 1 or tf.den.degree < 1:
        return tf
    zn = list(poly_roots(tf.num).roots)
    zd = list(poly_roots(tf.den).roots)
    keep_n, cancelled = [], 0
    for r in zn:
        if zd:
            j = min(range(len(zd)), key=lambda j: abs(r - zd[j]))
            if abs(r - zd[j]) <= tol * max(abs(r), abs(zd[j])):
                zd.pop(j)
                cancelled += 1
                continue
        keep_n.append(r)
    if not cancelled:
        return tf
    gain = tf.num.lead / tf.den.lead
    num = gain * npoly.polyfromroots(keep_n).real if keep_n else np.array([gain])
    den = npoly.polyfromroots(zd).real if zd else np.array([1.0])
    return RationalTF(num, den, tf.delay)


def reduction_error(original: RationalTF, reduced: RationalTF, omegas: Sequence[float]) -> float:
    """Largest relative pointwise deviation between two transfer functions."""
    a = freq_response(original, omegas)
    b = freq_response(reduced, omegas)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), np.finfo(float).tiny)))
