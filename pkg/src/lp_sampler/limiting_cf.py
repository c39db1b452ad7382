"""Characteristic function of the truncated tail-sum law.

The law of the normalized sum of squared tail scalings below a truncation
level ``R`` is infinitely divisible with Levy density ``s * z**(-1-s)`` on
``(0, R]``, ``s = p/2``.  Its log-characteristic function has the closed
form

    C(t) = R**-s * (1 + s * h(s, -i t R)),

with ``h`` from :mod:`lp_sampler.special`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import one_plus_s_h

SMALL_XI = 1e-8


@dataclass(frozen=True)
class TailLawParams:
    """Truncated tail law: exponent ``p`` in (0, 2) and truncation ``R > 0``."""

    p: float
    R: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 2.0:
            raise ValueError(f"p must lie in (0, 2), got {self.p}")
        if not (self.R > 0.0 and math.isfinite(self.R)):
            raise ValueError(f"R must be positive and finite, got {self.R}")

    @property
    def s(self) -> float:
        return self.p / 2.0

    @property
    def intensity(self) -> float:
        """R**-s, the mass the untruncated Levy measure puts above R."""
        return self.R ** (-self.s)

    @property
    def mean(self) -> float:
        s = self.s
        return s * self.R ** (1.0 - s) / (1.0 - s)

    @property
    def variance(self) -> float:
        s = self.s
        return s * self.R ** (2.0 - s) / (2.0 - s)


def log_cf(t, law: TailLawParams):
    """C(t) = R**-s (1 + s h(s, -itR)); exactly 0 at t = 0."""
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    z = -1j * tt * law.R
    out = law.intensity * one_plus_s_h(law.s, z)
    return complex(out[0]) if scalar else out.reshape(np.shape(t))


def cf(t, law: TailLawParams):
    """phi(t) = exp(C(t))."""
    c = log_cf(t, law)
    return complex(np.exp(c)) if np.ndim(c) == 0 else np.exp(c)


def gil_pelaez_integrand(xi, t: float, law: TailLawParams):
    """Im(exp(-i t xi) phi(xi)) / xi for xi > 0.

    F(t) = 1/2 - (1/pi) * integral_0^inf of this.  For xi below 1e-8 the
    first-order expansion Im((1 - i t xi)(1 + C(xi))) / xi is used, which
    stays finite as xi -> 0.
    """
    scalar = np.ndim(xi) == 0
    x = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    if np.any(~(x > 0)):
        raise ValueError("xi must be positive")
    c = log_cf(x, law)
    out = np.empty_like(x)
    small = x < SMALL_XI
    big = ~small
    if big.any():
        xb = x[big]
        out[big] = np.imag(np.exp(c[big] - 1j * t * xb)) / xb
    if small.any():
        xs = x[small]
        cs = c[small]
        out[small] = np.imag(cs) / xs - t * (1.0 + np.real(cs))
    return float(out[0]) if scalar else out.reshape(np.shape(xi))
