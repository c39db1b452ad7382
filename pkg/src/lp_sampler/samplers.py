"""Per-coordinate head and tail samplers.

Each coordinate carries a Poisson process of normalized scalings
``Gamma_j**(-1/p)`` where ``Gamma_j`` are unit-rate arrival times.  The
*head* is the top ``tau`` of them; the *tail aggregate* is the sum of the
squares of all the others, whose law given the head is the truncated
tail-sum law with ``R = v_tau**2``.

Two tail samplers are provided:

* :func:`sample_tail_sum` inverts the CDF of that law directly;
* :func:`sample_tail_composed` first walks extra arrivals until the
  remaining law has intensity at least :data:`COMPOSE_MIN_INTENSITY`, then
  inverts the remainder, optionally through a precomputed
  :class:`TailQuantileTable`.  The walk is exact in law because arrivals
  beyond any arrival time form a fresh Poisson process.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.special import ndtr, ndtri
from scipy.stats import poisson

from .cdf import CdfEvaluator, QuadratureConfig, cdf_evaluator
from .limiting_cf import TailLawParams
from .randomness import Label, RandomTape, derive_uniform

Y_CLAMP = 2.0 ** -40
MAX_BRACKET_DOUBLINGS = 60
MAX_SEARCH_STEPS = 400
COMPOSE_MIN_INTENSITY = 8.0
ARRIVAL_BLOCK = 16


class TailBracketError(ArithmeticError):
    """The doubling search for an upper bracket hit its cap."""


@dataclass(frozen=True)
class HeadStatistics:
    """Top ``tau`` scalings ``v_1 > ... > v_tau`` and their arrival times."""

    values: tuple[float, ...]
    arrivals: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.arrivals) or len(self.values) < 1:
            raise ValueError("values and arrivals must be non-empty and of equal length")

    @property
    def tau(self) -> int:
        return len(self.values)

    @property
    def R(self) -> float:
        """Truncation level of the tail law: the squared smallest head value."""
        return self.values[-1] ** 2


@dataclass(frozen=True)
class TailAggregate:
    sigma_sq: float

    def __post_init__(self) -> None:
        if not (self.sigma_sq >= 0.0 and math.isfinite(self.sigma_sq)):
            raise ValueError(f"sigma_sq must be finite and non-negative, got {self.sigma_sq}")


def head_from_exponentials(exps, p: float) -> HeadStatistics:
    arrivals = np.cumsum(np.asarray(exps, dtype=np.float64))
    values = arrivals ** (-1.0 / p)
    return HeadStatistics(tuple(values.tolist()), tuple(arrivals.tolist()))


def sample_head(tape: RandomTape, i: int, tau: int, p: float) -> HeadStatistics:
    """Head of coordinate ``i``: positions ``0..tau-1`` of path ``(i, HEAD)``."""
    if tau < 2:
        raise ValueError(f"tau must be at least 2, got {tau}")
    if not 0.0 < p < 2.0:
        raise ValueError(f"p must lie in (0, 2), got {p}")
    exps = tape.exponentials([(Label.COORDINATE, i), (Label.HEAD, 0)], tau)
    return head_from_exponentials(exps, p)


def sample_head_ppp_region(tape: RandomTape, y0: float, p: float, trial: int = 0) -> list[float]:
    """Points above ``y0`` of the process with tail intensity ``y**-p``, decreasing.

    Counts are Poisson(``y0**-p``) and locations ``y0 * U**(-1/p)``.  This is
    an independent construction of the same process, kept as a cross-check
    for :func:`sample_head`.
    """
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    base = [(Label.TRIAL, trial)]
    u = derive_uniform(tape, base + [(Label.PPP_COUNT, 0)])
    count = int(poisson.ppf(u, y0 ** (-p)))
    if count == 0:
        return []
    locs = y0 * tape.uniforms(base + [(Label.PPP_LOCATIONS, 0)], count) ** (-1.0 / p)
    return sorted(locs.tolist(), reverse=True)


def round_to_bits(x: float, bits: int) -> float:
    """Round ``x`` to ``bits`` significant bits, ties to even."""
    if x == 0.0 or not math.isfinite(x):
        return x
    mantissa, exponent = math.frexp(x)
    return math.ldexp(round(mantissa * (1 << bits)), exponent - bits)


def _target_width(x: float, scale: float, bits: int) -> float:
    return 2.0 ** -bits * max(scale, abs(x))


def invert_cdf(ev: CdfEvaluator, y: float, bits: int) -> float:
    """Point ``x`` with ``F(lo) < y <= F(hi)`` on a bracket around ``x`` of
    width at most ``2**-bits * max(R, x)``; ``x`` is the bracket midpoint.

    Measuring the width against ``R`` rather than 1 keeps the precision
    relative for laws concentrated far below 1.

    The bracket starts from doubling the law mean.  Inside it, Newton steps
    using the density are taken when they stay in the bracket and at least
    halve the step before last, bisection otherwise.  Once a Newton step is smaller than the
    target width the bracket is closed by evaluating both ends of a
    target-width interval around it.  Far from ``y`` the CDF is only refined
    until the side of ``y`` is settled.
    """
    law = ev.law
    y_eff = min(y, 1.0 - ev.q.tolerance)
    lo, hi = 0.0, law.mean
    pt = ev.evaluate_near(hi, y_eff)
    doublings = 0
    while pt.cdf < y_eff:
        lo = hi
        hi *= 2.0
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise TailBracketError(f"no upper bracket for y={y} after {MAX_BRACKET_DOUBLINGS} doublings")
        pt = ev.evaluate_near(hi, y_eff)
    x = hi
    last_step = prev_step = hi - lo
    for _ in range(MAX_SEARCH_STEPS):
        tgt = _target_width(0.5 * (lo + hi), law.R, bits)
        if hi - lo <= tgt:
            return 0.5 * (lo + hi)
        step = (pt.cdf - y_eff) / pt.density if pt.density > 0.0 else math.inf
        cand = x - step
        if pt.converged and abs(step) < 0.25 * tgt and lo < cand < hi:
            a, b = max(lo, cand - 0.5 * tgt), min(hi, cand + 0.5 * tgt)
            if ev.evaluate_near(a, y_eff).cdf < y_eff:
                lo = a
            if ev.evaluate_near(b, y_eff).cdf >= y_eff:
                hi = b
            if hi - lo <= _target_width(0.5 * (lo + hi), law.R, bits):
                return 0.5 * (lo + hi)
            cand = 0.5 * (lo + hi)
        elif not (lo < cand < hi) or abs(step) > 0.5 * prev_step:
            # Newton left the bracket or is not converging fast enough
            cand = 0.5 * (lo + hi)
        prev_step, last_step = last_step, abs(cand - x)
        x = cand
        pt = ev.evaluate_near(x, y_eff)
        if pt.cdf < y_eff:
            lo = x
        else:
            hi = x
    raise TailBracketError(f"quantile search for y={y} did not close within {MAX_SEARCH_STEPS} steps")


def clamp_uniform(y: float) -> float:
    return min(max(y, Y_CLAMP), 1.0 - Y_CLAMP)


def sample_tail_sum(
    tape: RandomTape,
    law: TailLawParams,
    L_bits: int = 30,
    q: QuadratureConfig = QuadratureConfig(),
    key=((Label.TAIL, 0),),
) -> TailAggregate:
    """Draw from the truncated tail-sum law by inverting its CDF.

    The uniform comes from ``key`` on ``tape`` and is clamped to
    ``[2**-40, 1 - 2**-40]``; the result is rounded to ``L_bits``
    significant bits.
    """
    if not 8 <= L_bits <= 48:
        raise ValueError(f"L_bits must lie in [8, 48], got {L_bits}")
    y = clamp_uniform(derive_uniform(tape, key))
    x = invert_cdf(cdf_evaluator(law, q), y, L_bits)
    return TailAggregate(round_to_bits(x, L_bits))


class TailQuantileTable:
    """Standardized quantiles of the tail law over a range of intensities.

    For intensity ``lam = R**-s`` the law of ``X / R`` depends on ``lam``
    only.  The table stores ``(Q(y) - mean) / sd`` on a grid of
    ``log(lam)`` and probit ``ndtri(y)``, each entry from exact inversion,
    and interpolates with a bicubic spline.
    """

    LOG_POINTS = 29
    PROBIT_POINTS = 145
    PROBIT_LIMIT = 7.2

    def __init__(
        self,
        p: float,
        lam_min: float = COMPOSE_MIN_INTENSITY,
        lam_max: float = 128.0,
        q: QuadratureConfig = QuadratureConfig(),
        bits: int = 40,
    ) -> None:
        if not 0 < lam_min < lam_max:
            raise ValueError("need 0 < lam_min < lam_max")
        self.p = float(p)
        self.s = self.p / 2.0
        self.lam_min, self.lam_max = float(lam_min), float(lam_max)
        self.log_grid = np.linspace(math.log(lam_min), math.log(lam_max), self.LOG_POINTS)
        self.probit_grid = np.linspace(-self.PROBIT_LIMIT, self.PROBIT_LIMIT, self.PROBIT_POINTS)
        ys = ndtr(self.probit_grid)
        values = np.empty((self.LOG_POINTS, self.PROBIT_POINTS))
        for a, log_lam in enumerate(self.log_grid):
            law = self._law(math.exp(log_lam))
            ev = CdfEvaluator(law, q)
            sd = math.sqrt(law.variance)
            for b, y in enumerate(ys):
                values[a, b] = (invert_cdf(ev, clamp_uniform(float(y)), bits) - law.mean) / sd
        self.values = values
        self._spline = RectBivariateSpline(self.log_grid, self.probit_grid, values, kx=3, ky=3)

    def _law(self, lam: float) -> TailLawParams:
        return TailLawParams(self.p, lam ** (-1.0 / self.s))

    def covers(self, lam: float) -> bool:
        return self.lam_min <= lam <= self.lam_max

    def quantile(self, lam: float, y: float) -> float:
        if not self.covers(lam):
            raise ValueError(f"intensity {lam} outside the table range [{self.lam_min}, {self.lam_max}]")
        law = self._law(lam)
        z = float(ndtri(clamp_uniform(y)))
        standardized = float(self._spline(math.log(lam), z, grid=False))
        return max(0.0, law.mean + math.sqrt(law.variance) * standardized)


def tail_quantile_table(p: float, q: QuadratureConfig = QuadratureConfig()) -> TailQuantileTable:
    """Shared table per ``(p, q)``."""
    return _cached_table(float(p), q)


@functools.lru_cache(maxsize=8)
def _cached_table(p: float, q: QuadratureConfig) -> TailQuantileTable:
    return TailQuantileTable(p, q=q)


def sample_tail_composed(
    tape: RandomTape,
    i: int,
    head: HeadStatistics,
    p: float,
    L_bits: int = 30,
    q: QuadratureConfig = QuadratureConfig(),
    table: TailQuantileTable | None = None,
) -> TailAggregate:
    """Tail aggregate given ``head``, via explicit arrivals plus a remainder.

    Arrivals after the head come from path ``(i, TAIL_ARRIVALS)`` until one
    reaches :data:`COMPOSE_MIN_INTENSITY`; their squared scalings are summed
    explicitly.  The rest has the tail law at that arrival's level and is
    drawn with the uniform at ``(i, TAIL)``, through ``table`` when it covers
    the intensity and by direct inversion otherwise.
    """
    gamma = head.arrivals[-1]
    explicit = 0.0
    last_term = 0.0
    base = [(Label.COORDINATE, i)]
    block = 0
    while gamma < COMPOSE_MIN_INTENSITY:
        exps = tape.exponentials(base + [(Label.TAIL_ARRIVALS, block)], ARRIVAL_BLOCK)
        for e in exps:
            gamma += float(e)
            if gamma >= COMPOSE_MIN_INTENSITY:
                last_term = gamma ** (-2.0 / p)
                break
            explicit += gamma ** (-2.0 / p)
        block += 1
    # the last arrival (head or extra) sets the remainder's level
    law = TailLawParams(p, gamma ** (-2.0 / p))
    key = base + [(Label.TAIL, 0)]
    if table is not None and table.covers(gamma):
        y = clamp_uniform(derive_uniform(tape, key))
        remainder = table.quantile(gamma, y)
    else:
        remainder = sample_tail_sum(tape, law, L_bits, q, key=key).sigma_sq
    return TailAggregate(round_to_bits(explicit + last_term + remainder, L_bits))
