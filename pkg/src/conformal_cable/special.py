"""Real-order Bessel functions J_alpha and N_alpha (Neumann / Y) for alpha in [0, 20].

Small and moderate arguments use the ascending power series summed in
extended precision (``numpy.longdouble``); large arguments use the Hankel
asymptotic expansion for the fractional orders ``mu`` and ``mu + 1`` followed
by forward recurrence in the order.  The crossover ``s_switch(alpha)`` is the
point where the estimated rounding error of the series meets the truncation
error of the asymptotic expansion.

N_alpha comes from the reflection formula
``(J_alpha cos(alpha pi) - J_{-alpha}) / sin(alpha pi)`` away from integers.
Integer orders use the logarithmic expansion, whose digamma values at integers
are harmonic numbers.  Orders within ``1e-4`` of an integer n take a quadratic
Taylor step from ``N_n``; the derivatives in the order are Richardson-combined
differences of the reflection formula at ``n +- 1e-3`` and ``n +- 2e-3``.
"""
from __future__ import annotations

import functools
import math

import numpy as np

from .geometry import PARABOLIC_TOL, RegimeError

__all__ = [
    "MAX_ORDER",
    "UnsupportedOrderError",
    "bessel_j",
    "bessel_n",
    "order_for_nu",
    "switch_point",
]

MAX_ORDER = 20.0

_LD = np.longdouble
_EPS_LD = float(np.finfo(_LD).eps)
_PI_LD = _LD("3.14159265358979323846264338327950288")
_MAX_SERIES_TERMS = 400
_NEAR_INT = 1e-4
_TAYLOR_STEP = 1e-3
_EULER = _LD("0.577215664901532860606512090082402431")
_ZETA = (
    None,
    None,
    _LD("1.64493406684822643647241516664602519"),
    _LD("1.20205690315959428539973816151144999"),
    _LD("1.08232323371113819151600369654116790"),
    _LD("1.03692775514336992633136548645703417"),
)
_MAX_ASYMPTOTIC_TERMS = 80


class UnsupportedOrderError(ValueError):
    """Order outside [0, 20] or imaginary."""


def _check_order(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0 or alpha > MAX_ORDER:
        raise UnsupportedOrderError(f"order must lie in [0, {MAX_ORDER}], got {alpha}")
    return alpha


def _rgamma(alpha: float, shift: int = 1):
    """``1 / Gamma(alpha + shift)`` in long double.

    Near integers the Gamma value feeds a cancellation amplified by
    ``1 / sin(alpha pi)``, so there it is built from the log-series of
    ``Gamma(1 + d)`` (|d| <= 1e-4, truncation below 1e-20) and exact shifts.
    """
    x = _LD(alpha) + shift
    n = int(np.rint(x))
    d = x - n
    if abs(d) > _NEAR_INT:
        return _LD(1) / _LD(math.gamma(float(x)))
    lg = -_EULER * d
    for k in range(2, 6):
        lg += (-1) ** k * _ZETA[k] * d**k / k
    g = np.exp(lg)  # Gamma(1 + d)
    if n >= 1:
        for j in range(1, n):
            g *= j + d
        return _LD(1) / g
    prod = _LD(1)
    for j in range(n, 1):
        prod *= j + d
    return prod / g


def _series(alpha: float, s: np.ndarray):
    """Sum of (-1)^k (s/2)^(2k+alpha) / (k! Gamma(k+alpha+1)) in long double.

    ``alpha`` may be negative but not a negative integer.  Returns the sum and
    the sum of absolute values of the terms (the rounding-error scale).
    """
    hs = s.astype(_LD) / 2
    q = -hs * hs
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        term = np.power(hs, _LD(alpha)) * _rgamma(alpha)
    if alpha == 0.0:
        term = np.where(hs == 0, _LD(1), term)
    total = term.copy()
    scale = np.abs(term)
    for k in range(1, _MAX_SERIES_TERMS):
        term = term * q / (_LD(k) * (_LD(k) + _LD(alpha)))
        total += term
        scale += np.abs(term)
        # terms fall monotonically once (s/2)^2 < k (k + alpha)
        if np.all(np.abs(term) <= _EPS_LD * scale) and np.all(k * (k + alpha) > hs * hs):
            break
    return total, scale


def _hankel(mu: float, s: np.ndarray):
    """J_mu and Y_mu from the Hankel expansion, truncated at the smallest term.

    Also returns the size of the first omitted term relative to the envelope.
    """
    s = np.asarray(s, dtype=float)
    m4 = 4.0 * mu * mu
    P = np.ones_like(s)
    Q = np.zeros_like(s)
    ak = np.ones_like(s)  # a_k(mu) / s^k
    prev = np.full_like(s, np.inf)
    active = np.ones(s.shape, dtype=bool)
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        ak = ak * (m4 - (2 * k - 1) ** 2) / (8.0 * k * s)
        mag = np.abs(ak)
        active &= mag < prev
        if not active.any():
            break
        sign = -1.0 if (k // 2) % 2 else 1.0
        contrib = np.where(active, sign * ak, 0.0)
        if k % 2 == 0:
            P += contrib
        else:
            Q += contrib
        prev = np.where(active, mag, prev)
        if np.all(mag == 0):
            break
    omega = s - (mu / 2.0 + 0.25) * math.pi
    env = np.sqrt(2.0 / (math.pi * s))
    c, sn = np.cos(omega), np.sin(omega)
    return env * (P * c - Q * sn), env * (P * sn + Q * c), prev


def _recur_up(c0, c1, mu, alpha, s):
    """Forward recurrence C_{v+1} = (2v/s) C_v - C_{v-1} from order mu to alpha."""
    n = int(round(alpha - mu))
    if n == 0:
        return c0
    v = mu + 1.0
    for _ in range(n - 1):
        c0, c1 = c1, (2.0 * v / s) * c1 - c0
        v += 1.0
    return c1


def _large_arg(alpha: float, s: np.ndarray):
    mu = alpha - math.floor(alpha)
    j0, y0, _ = _hankel(mu, s)
    if alpha == mu:
        return j0, y0
    j1, y1, _ = _hankel(mu + 1.0, s)
    return _recur_up(j0, j1, mu, alpha, s), _recur_up(y0, y1, mu, alpha, s)


def _asymptotic_error(alpha: float, s: float) -> float:
    mu = alpha - math.floor(alpha)
    errs = [_hankel(m, np.array([s]))[2][0] for m in (mu, mu + 1.0)]
    return float(max(errs))


def _series_error(alpha: float, s: float) -> float:
    env = math.sqrt(2.0 / (math.pi * s))
    arr = np.array([s])
    worst = float(_series(alpha, arr)[1][0])
    neg = -alpha if abs(alpha - round(alpha)) > _NEAR_INT else -(round(alpha) + _TAYLOR_STEP)
    worst = max(worst, float(_series(neg, arr)[1][0]))
    return _EPS_LD * worst / env


@functools.lru_cache(maxsize=256)
def switch_point(alpha: float) -> float:
    """Crossover between series and asymptotic branches for order ``alpha``.

    First grid point where the asymptotic truncation error drops below the
    series rounding error, kept at least 2 above ``alpha`` so that the forward
    recurrence in the order runs in the oscillatory region.
    """
    alpha = _check_order(alpha)
    lo = max(6.0, alpha + 2.0)
    for s in np.arange(lo, 120.0, 0.25):
        if _asymptotic_error(alpha, s) <= _series_error(alpha, s):
            return float(s)
    return 120.0


def _as_array(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError("argument must be finite")
    return arr


def _finish(out, scalar):
    if not np.all(np.isfinite(out)):
        raise OverflowError("Bessel evaluation overflowed")
    return float(out) if scalar else out


def _j_impl(alpha, s):
    out = np.empty_like(s)
    sw = switch_point(alpha)
    lo = s <= sw
    if lo.any():
        out[lo] = _series(alpha, s[lo])[0].astype(float)
    if (~lo).any():
        out[~lo] = _large_arg(alpha, s[~lo])[0]
    return out


def bessel_j(alpha: float, s):
    """Bessel function of the first kind ``J_alpha(s)`` for ``s >= 0``."""
    alpha = _check_order(alpha)
    arr = _as_array(s)
    if np.any(arr < 0):
        raise ValueError("bessel_j needs s >= 0")
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        out = _j_impl(alpha, flat).reshape(np.shape(arr))
    return _finish(out, scalar)


def _reflection(alpha: float, s: np.ndarray) -> np.ndarray:
    # alpha is not an integer here
    n = math.floor(alpha)
    frac = _LD(alpha - n)
    sign = -1 if n % 2 else 1
    cos_a = sign * np.cos(frac * _PI_LD)
    sin_a = sign * np.sin(frac * _PI_LD)
    jp, _ = _series(alpha, s)
    jm, _ = _series(-alpha, s)
    return ((jp * cos_a - jm) / sin_a).astype(float)


def _n_integer(n: int, s: np.ndarray) -> np.ndarray:
    """N_n for integer n from the logarithmic expansion (harmonic-number form)."""
    hs = s.astype(_LD) / 2
    q = hs * hs
    out = (2 / _PI_LD) * np.log(hs) * _series(float(n), s)[0]
    if n > 0:
        finite = np.zeros_like(hs)
        term = _LD(math.factorial(n - 1))  # (n-k-1)!/k! at k = 0
        for k in range(n):
            finite += term * q**k
            if k < n - 1:
                term = term / ((n - k - 1) * (k + 1))
        out -= finite * hs ** (-n) / _PI_LD
    # -(1/pi) (s/2)^n sum_k [psi(k+1) + psi(n+k+1)] (-s^2/4)^k / (k! (n+k)!)
    h_k = _LD(0)
    h_nk = sum((_LD(1) / j for j in range(1, n + 1)), _LD(0))
    term = hs**n / _LD(math.factorial(n))
    acc = (h_k + h_nk - 2 * _EULER) * term
    scale = np.abs(acc)
    for k in range(1, _MAX_SERIES_TERMS):
        term = term * (-q) / (_LD(k) * (n + k))
        h_k += _LD(1) / k
        h_nk += _LD(1) / (n + k)
        contrib = (h_k + h_nk - 2 * _EULER) * term
        acc += contrib
        scale += np.abs(contrib)
        if np.all(np.abs(contrib) <= _EPS_LD * scale) and np.all(k * (k + n) > q):
            break
    out -= acc / _PI_LD
    return out.astype(float)


def _n_series(alpha: float, s: np.ndarray) -> np.ndarray:
    n = int(round(alpha))
    delta = alpha - n
    if delta == 0.0:
        return _n_integer(n, s)
    if abs(delta) >= _NEAR_INT:
        return _reflection(alpha, s)
    # quadratic Taylor step in the order around the integer n; the five-point
    # stencils are Richardson combinations of step h and 2h
    h = _TAYLOR_STEP
    mid = _n_integer(n, s)
    p1, m1 = _reflection(n + h, s), _reflection(n - h, s)
    p2, m2 = _reflection(n + 2 * h, s), _reflection(n - 2 * h, s)
    d1 = (8 * (p1 - m1) - (p2 - m2)) / (12 * h)
    d2 = (16 * (p1 + m1) - (p2 + m2) - 30 * mid) / (12 * h**2)
    return mid + delta * d1 + 0.5 * delta**2 * d2


def bessel_n(alpha: float, s):
    """Neumann function ``N_alpha(s)`` (Bessel of the second kind) for ``s > 0``.

    Raises :class:`~conformal_cable.geometry.DomainError` at ``s <= 0``, where
    the function diverges.
    """
    from .geometry import DomainError

    alpha = _check_order(alpha)
    arr = _as_array(s)
    if np.any(arr <= 0):
        raise DomainError("N_alpha is singular at s = 0")
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    sw = switch_point(alpha)
    lo = flat <= sw
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if lo.any():
            out[lo] = _n_series(alpha, flat[lo])
        if (~lo).any():
            out[~lo] = _large_arg(alpha, flat[~lo])[1]
    return _finish(out.reshape(np.shape(arr)), scalar)


def order_for_nu(nu: float) -> float:
    """Bessel order ``sqrt(1/4 + 3 nu (5 nu - 4) / (4 (2 - nu)**2))``.

    The radicand equals ``((1 - 2 nu) / (2 - nu))**2``, so it is never negative
    and vanishes only at ``nu = 1/2``.
    """
    if abs(nu - 2.0) < PARABOLIC_TOL:
        raise RegimeError("order undefined at nu = 2")
    rad = 0.25 + 3.0 * nu * (5.0 * nu - 4.0) / (4.0 * (2.0 - nu) ** 2)
    if rad < 0:
        if rad > -1e-14:
            rad = 0.0
        else:
            raise UnsupportedOrderError(f"imaginary order for nu = {nu}")
    alpha = math.sqrt(rad)
    if alpha > MAX_ORDER:
        raise UnsupportedOrderError(f"order {alpha:.3g} exceeds {MAX_ORDER} for nu = {nu}")
    return alpha
