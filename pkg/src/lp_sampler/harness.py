"""Brute-force oracles and test statistics.

Nothing here imports the production samplers or the CDF machinery: the
finite-duplication oracles draw ``k`` i.i.d. exponentials per coordinate
(literally, or through their order statistics) with numpy's own generator.

The fast oracles use the Renyi representation of exponential order
statistics for the ``J`` most significant terms and replace the sum of the
remaining ones by a Gaussian with the exact conditional mean and variance.
Those moments are incomplete gamma values of negative order: a continued
fraction for ``x > 1``, otherwise ``scipy`` at order in ``(0, 1]`` and the
recurrence ``Gamma(b, x) = (Gamma(b + 1, x) - x**b exp(-x)) / b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import special, stats

from .randomness import Label, RandomTape

DEFAULT_EXPLICIT_TERMS = 128


class ExpectedCountError(ValueError):
    """Too few observations for the chi-square approximation."""


@dataclass(frozen=True)
class FiniteKSample:
    head: tuple[float, ...]
    tail_sq: float
    k: int


def brute_force_finite_k(tape: RandomTape, p: float, k: int, tau: int, trial: int = 0) -> FiniteKSample:
    """Top ``tau`` of ``(k e_j)**(-1/p)`` over ``k`` exponentials, plus the
    sum of squares of the rest.  Literal and slow: ``k`` draws per call."""
    if k < tau:
        raise ValueError(f"k must be at least tau, got k={k}, tau={tau}")
    e = tape.exponentials([(Label.TRIAL, trial), (Label.AUX, 0)], k)
    values = np.sort((k * e) ** (-1.0 / p))[::-1]
    return FiniteKSample(tuple(values[:tau].tolist()), float(np.sum(values[tau:] ** 2)), k)


def _scaled_upper_gamma_cf(b: float, x: np.ndarray) -> np.ndarray:
    """Legendre continued fraction by modified Lentz; stable for ``x > 1``."""
    tiny = 1e-300
    den = x + 1.0 - b
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / den
    h = d.copy()
    for i in range(1, 2000):
        an = -i * (i - b)
        den = den + 2.0
        d = an * d + den
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = den + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        step = c * d
        h = h * step
        if np.all(np.abs(step - 1.0) < 1e-16):
            break
    return x**b * h


def _scaled_upper_gamma_recurrence(b: float, x: np.ndarray) -> np.ndarray:
    """Upward from an order in ``(0, 1]``; accurate for ``x <= 1`` away from integer orders."""
    steps = int(math.ceil(-b)) if b < 0 else 0
    base = b + steps
    if base == 0.0:
        g = special.exp1(x) * np.exp(x)
    else:
        g = special.gammaincc(base, x) * special.gamma(base) * np.exp(x)
    a = base
    for _ in range(steps):
        a -= 1.0
        g = (g - x**a) / a
    return g


def scaled_upper_gamma(b: float, x: np.ndarray) -> np.ndarray:
    """``exp(x) * Gamma(b, x)`` for real ``b <= 1`` and ``x > 0``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    large = x > 1.0
    out[large] = _scaled_upper_gamma_cf(b, x[large])
    small = x[~large]
    if 0.0 < abs(b - round(b)) < 1e-4:
        # the recurrence cancels next to integer orders
        out[~large] = [float(mpmath.exp(v) * mpmath.gammainc(b, v)) for v in small]
    else:
        out[~large] = _scaled_upper_gamma_recurrence(b, small)
    return out


def remainder_moments(c: np.ndarray, k: float, power: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of ``(c + k X)**-power`` with ``X ~ Exp(1)``."""
    x = np.asarray(c, dtype=np.float64) / k
    m1 = k**-power * scaled_upper_gamma(1.0 - power, x)
    m2 = k ** (-2.0 * power) * scaled_upper_gamma(1.0 - 2.0 * power, x)
    return m1, np.maximum(m2 - m1 * m1, 0.0)


def _renyi_smallest(rng: np.random.Generator, count: np.ndarray, size: int, J: int) -> np.ndarray:
    """Smallest ``J`` of ``count`` i.i.d. exponentials, ascending, per row."""
    spacings = rng.standard_exponential((size, J))
    denominators = count[:, None] - np.arange(J)[None, :]
    return np.cumsum(spacings / denominators, axis=1)


def _sum_with_remainder(rng, p, k, offset, count, J):
    """Sorted top ``J`` terms ``(offset + k E)**(-2/p)`` and the total of all ``count``."""
    power = 2.0 / p
    smallest = _renyi_smallest(rng, count, count.size, J)
    terms = (offset[:, None] + k * smallest) ** -power
    rest = count - J
    m1, var = remainder_moments(offset + k * smallest[:, -1], k, power)
    remainder = rest * m1 + np.sqrt(rest * var) * rng.standard_normal(count.size)
    return terms, np.maximum(remainder, 0.0)


def finite_k_tail_sums(
    rng: np.random.Generator, p: float, R: float, k: int, size: int, J: int = DEFAULT_EXPLICIT_TERMS
) -> np.ndarray:
    """Samples of ``sum_j (k e_j)**(-2/p)`` over the terms not exceeding ``R``."""
    lam = R ** (-p / 2.0)
    below = rng.binomial(k, -math.expm1(-lam / k), size=size)
    count = (k - below).astype(np.float64)
    if np.any(count <= J):
        raise ValueError("too few terms below the truncation for the explicit block")
    offset = np.full(size, lam)
    terms, remainder = _sum_with_remainder(rng, p, k, offset, count, J)
    return terms.sum(axis=1) + remainder


def finite_k_joint(
    rng: np.random.Generator, p: float, k: int, tau: int, size: int, J: int = DEFAULT_EXPLICIT_TERMS
) -> tuple[np.ndarray, np.ndarray]:
    """Top ``tau`` normalized values (shape ``(size, tau)``) and the tail sum of squares."""
    if J <= tau:
        raise ValueError("J must exceed tau")
    count = np.full(size, float(k))
    terms, remainder = _sum_with_remainder(rng, p, k, np.zeros(size), count, J)
    head = np.sqrt(terms[:, :tau])
    tail = terms[:, tau:].sum(axis=1) + remainder
    return head, tail


def exact_lp_distribution(x: Sequence[float], p: float) -> np.ndarray:
    weights = np.abs(np.asarray(x, dtype=np.float64)) ** p
    total = weights.sum()
    if total == 0:
        raise ValueError("the all-zero vector has no L_p distribution")
    return weights / total


@dataclass(frozen=True)
class ChiSquareResult:
    passed: bool
    statistic: float
    threshold: float
    dof: int


def chi_square_test(counts: Sequence[int], probs: Sequence[float], significance: float = 0.01) -> ChiSquareResult:
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if counts.shape != probs.shape or counts.ndim != 1 or counts.size < 2:
        raise ValueError("counts and probs must be matching vectors of length >= 2")
    if np.any(probs <= 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
        raise ValueError("probs must be positive and sum to 1")
    total = counts.sum()
    if total < 50.0 / probs.min():
        raise ExpectedCountError(f"need at least {50.0 / probs.min():.0f} observations, got {total:.0f}")
    expected = total * probs
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    dof = counts.size - 1
    threshold = float(stats.chi2.ppf(1.0 - significance, dof))
    return ChiSquareResult(statistic <= threshold, statistic, threshold, dof)


def ks_statistic(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample KS distance of sorted ``samples`` from ``cdf`` (vectorized)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    n = x.size
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(f - i / n)), np.max(np.abs(f - (i - 1) / n))))


def two_sample_ks(a: Sequence[float], b: Sequence[float]) -> float:
    return float(stats.ks_2samp(a, b).statistic)


def tvd(counts: Sequence[int], probs: Sequence[float]) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    return 0.5 * float(np.sum(np.abs(counts / counts.sum() - np.asarray(probs))))


def sup_discrepancy(samples: np.ndarray, grid: np.ndarray, values: np.ndarray) -> float:
    """``max |ECDF(t) - values|`` over the grid points ``t``."""
    s = np.sort(samples)
    ecdf = np.searchsorted(s, grid, side="right") / s.size
    return float(np.max(np.abs(ecdf - values)))


def limit_law_tail_sums(
    rng: np.random.Generator, p: float, R: float, size: int, J: int = DEFAULT_EXPLICIT_TERMS
) -> np.ndarray:
    """Samples of the infinite-duplication tail law truncated at ``R``.

    Points ``(lam + Gamma_j)**(-2/p)`` over unit-rate arrivals ``Gamma_j``,
    ``lam = R**(-p/2)``; the first ``J`` explicitly, the rest by a Gaussian
    with the exact mean and variance of the remaining Poisson sum.
    """
    power = 2.0 / p
    lam = R ** (-p / 2.0)
    arrivals = lam + np.cumsum(rng.standard_exponential((size, J)), axis=1)
    explicit = np.sum(arrivals ** -power, axis=1)
    c = arrivals[:, -1]
    mean = c ** (1.0 - power) / (power - 1.0)
    var = c ** (1.0 - 2.0 * power) / (2.0 * power - 1.0)
    return explicit + np.maximum(mean + np.sqrt(var) * rng.standard_normal(size), -mean)


def finite_k_mean_deficit(p: float, R: float, k: int) -> float:
    """Limit-law mean minus the finite-``k`` truncated-sum mean."""
    power = 2.0 / p
    lam = R ** (-p / 2.0)
    finite = k ** (1.0 - power) * float(scaled_upper_gamma(1.0 - power, np.array([lam / k]))[0]) * math.exp(-lam / k)
    return lam ** (1.0 - power) / (power - 1.0) - finite
