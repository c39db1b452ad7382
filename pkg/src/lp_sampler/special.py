"""Incomplete gamma machinery for complex arguments.

The quantity of interest is

    h(s, z) = z**s * lower_gamma(-s, z) = sum_{n>=0} (-1)**n z**n / (n! (n - s))

for ``0 < s < 1``.  Three regimes are used:

* ``|z| <= 12``: the power series above, summed with Kahan compensation;
* ``12 < |z| < 60``: ``Gamma(-s) z**s - z**s Gamma(-s, z)`` with the upper
  gamma function from its Legendre continued fraction (modified Lentz);
* ``|z| >= 60``: the same complement with an optimally truncated
  asymptotic series for the upper gamma function.

All complex powers use the principal branch.  The public functions accept
scalars or numpy arrays for ``z``; ``s`` and ``a`` are real scalars.  The
per-element kernels are compiled with numba because callers evaluate them
on many small batches, where numpy's per-call overhead would dominate.
"""

from __future__ import annotations

import cmath
import math

import numba
import numpy as np

SERIES_RADIUS = 12.0
ASYMPTOTIC_RADIUS = 60.0
CF_MAX_ITER = 10_000

_EPS = 2.0 ** -53
_TINY = 1e-300
_EULER_GAMMA = 0.57721566490153286061


class GammaConvergenceError(ArithmeticError):
    """Raised when the continued fraction does not settle within its cap."""


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie strictly inside (0, 1), got {s}")
    return s


def gamma_negative(s: float) -> float:
    """Gamma(-s) for 0 < s < 1, via Gamma(1 - s) / (-s)."""
    s = _check_s(s)
    return math.gamma(1.0 - s) / (-s)


@numba.njit(cache=True)
def power_series(z, shift, start):
    """sum_{n>=start} (-z)^n / (n! (n + shift)) with Kahan compensation."""
    power = 1.0 + 0.0j
    total = 0.0j
    comp = 0.0j
    if start == 0:
        total = power / shift
    az = abs(z)
    for n in range(1, 600):
        power = power * (-z) / n
        term = power / (n + shift)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if n > az and abs(term) <= 1e-18 * max(abs(total), 1e-300):
            break
    return total


@numba.njit(cache=True)
def lentz_upper(a, z):
    """K(z) with Gamma(a, z) = exp(-z) z**a K(z), from the Legendre fraction.

    K = 1/(z+1-a- 1(1-a)/(z+3-a- 2(2-a)/(z+5-a- ...))).  Returns the value
    and whether it converged within the iteration cap.
    """
    b = z + (1.0 - a)
    c = 1.0 / _TINY + 0.0j
    d = 1.0 / b
    acc = d
    for i in range(1, CF_MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY + 0.0j
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY + 0.0j
        d = 1.0 / d
        delta = d * c
        acc = acc * delta
        if abs(delta - 1.0) < 4.0 * _EPS:
            return acc, True
    return acc, False


@numba.njit(cache=True)
def asymptotic_upper(a, z):
    """K(z) = z**-1 sum_k (a-1)(a-2)...(a-k) z**-k, stopped at the smallest term."""
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    prev = 1.0
    for k in range(1, 600):
        term = term * (a - k) / z
        mag = abs(term)
        if mag >= prev:
            break
        total += term
        if mag <= 0.25 * _EPS * abs(total):
            break
        prev = mag
    return total / z


@numba.njit(cache=True)
def upper_scaled(a, z):
    """K(z) for |z| > SERIES_RADIUS, from the fraction or the asymptotic series."""
    if abs(z) >= ASYMPTOTIC_RADIUS:
        return asymptotic_upper(a, z), True
    return lentz_upper(a, z)


@numba.njit(cache=True)
def h_scalar(s, z, drop_leading, gamma_neg):
    """h(s, z), or h(s, z) + 1/s when ``drop_leading``; plus a convergence flag."""
    if abs(z) <= SERIES_RADIUS:
        return power_series(z, -s, 1 if drop_leading else 0), True
    k, ok = upper_scaled(-s, z)
    val = gamma_neg * cmath.exp(s * cmath.log(z)) - cmath.exp(-z) * k
    if drop_leading:
        val += 1.0 / s
    return val, ok


@numba.njit(cache=True)
def _h_array(s, z, drop_leading, gamma_neg, out):
    ok_all = True
    for i in range(z.size):
        v, ok = h_scalar(s, z[i], drop_leading, gamma_neg)
        out[i] = v
        ok_all = ok_all and ok
    return ok_all


@numba.njit(cache=True)
def _upper_array(a, z, gamma_a, out):
    ok_all = True
    for i in range(z.size):
        zi = z[i]
        if abs(zi) <= SERIES_RADIUS:
            log_z = cmath.log(zi)
            if a == 0.0:
                out[i] = -_EULER_GAMMA - log_z - power_series(zi, 0.0, 1)
            else:
                out[i] = gamma_a - cmath.exp(a * log_z) * power_series(zi, a, 0)
        else:
            k, ok = upper_scaled(a, zi)
            out[i] = cmath.exp(-zi + a * cmath.log(zi)) * k
            ok_all = ok_all and ok
    return ok_all


def _as_complex_array(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=np.complex128)
    return np.ascontiguousarray(arr.ravel()), arr.ndim == 0


def _finish(out: np.ndarray, scalar: bool, shape):
    return complex(out[0]) if scalar else out.reshape(shape)


def _h_eval(s: float, z, drop_leading: bool):
    s = _check_s(s)
    arr, scalar = _as_complex_array(z)
    out = np.empty_like(arr)
    if not _h_array(s, arr, drop_leading, gamma_negative(s), out):
        raise GammaConvergenceError(
            f"continued fraction for Gamma({-s}, z) did not converge in {CF_MAX_ITER} iterations"
        )
    return out, scalar


def h_function(s: float, z):
    """h(s, z) = z**s * lower_gamma(-s, z), principal branch; h(s, 0) = -1/s.

    Values overflow to inf/nan once Re z < -709, where exp(-z) is not
    representable.
    """
    out, scalar = _h_eval(s, z, False)
    return _finish(out, scalar, np.shape(z))


def one_plus_s_h(s: float, z):
    """1 + s*h(s, z) with the cancelling constant removed analytically.

    Near z = 0 the two terms of ``1 + s*h`` cancel; summing the series from
    n = 1 keeps full relative accuracy there and gives exactly 0 at z = 0.
    """
    out, scalar = _h_eval(s, z, True)
    return _finish(s * out, scalar, np.shape(z))


def upper_gamma(a: float, z):
    """Gamma(a, z) for real a in (-1, 1] and complex z != 0, |arg z| <= 3pi/4.

    Small ``|z|`` uses Gamma(a) minus the lower series (the exponential
    integral series when ``a == 0``); larger ``|z|`` uses the continued
    fraction or the asymptotic series.
    """
    a = float(a)
    if not -1.0 < a <= 1.0:
        raise ValueError(f"a must lie in (-1, 1], got {a}")
    arr, scalar = _as_complex_array(z)
    if np.any(arr == 0):
        raise ValueError("upper_gamma is not defined here at z = 0")
    if np.any(np.abs(np.angle(arr)) > 3 * math.pi / 4 + 1e-12):
        raise ValueError("upper_gamma is validated only for |arg z| <= 3*pi/4")
    out = np.empty_like(arr)
    gamma_a = math.gamma(a) if a != 0.0 else math.nan
    if not _upper_array(a, arr, gamma_a, out):
        raise GammaConvergenceError(
            f"continued fraction for Gamma({a}, z) did not converge in {CF_MAX_ITER} iterations"
        )
    return _finish(out, scalar, np.shape(z))


def lower_gamma(a: float, z):
    """lower_gamma(a, z) for a in (-1, 1], a != 0, from the power series.

    Meant for moderate ``|z|`` only.
    """
    arr, scalar = _as_complex_array(z)
    out = np.array([cmath.exp(a * cmath.log(v)) * power_series(v, float(a), 0) for v in arr])
    return _finish(out.astype(np.complex128), scalar, np.shape(z))
