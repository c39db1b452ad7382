"""CDF of the truncated tail-sum law by Gil-Pelaez inversion.

    F(t) = 1/2 - (1/pi) * integral_0^inf Im(exp(-i t xi) phi(xi)) / xi dxi

The integral is cut at ``L`` (:func:`choose_truncation`) and evaluated with
the substitution ``xi = L/2 (1 + tanh u)`` followed by the trapezoid rule in
``u``, halving the mesh until two successive estimates agree.

Node positions and the values of ``phi`` at them do not depend on ``t``.
:class:`CdfEvaluator` keeps them per law, so evaluating the CDF at many
points (as a binary search does) only pays for the trigonometric factor.
"""

from __future__ import annotations

import cmath
import functools
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .limiting_cf import SMALL_XI, TailLawParams, log_cf
from .special import GammaConvergenceError, gamma_negative, h_scalar

MAX_DOUBLINGS = 60
MAX_NODES_PER_LEVEL = 1 << 25


@dataclass(frozen=True)
class QuadratureConfig:
    tolerance: float = 1e-9
    initial_mesh: float = 0.5
    max_halvings: int = 20
    growth: float = 2.0

    def __post_init__(self) -> None:
        if not 1e-14 < self.tolerance < 0.1:
            raise ValueError(f"tolerance must lie in (1e-14, 0.1), got {self.tolerance}")
        if self.max_halvings < 4:
            raise ValueError("max_halvings must be at least 4")
        if not self.initial_mesh > 0:
            raise ValueError("initial_mesh must be positive")
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")


class CdfConvergenceError(ArithmeticError):
    """Quadrature or truncation search did not converge.

    ``estimates`` holds the last two estimates (or probe values) seen.
    """

    def __init__(self, message: str, estimates: tuple[float, float]) -> None:
        super().__init__(f"{message} (last estimates {estimates[0]!r}, {estimates[1]!r})")
        self.estimates = estimates


def cf_envelope(xi: np.ndarray, law: TailLawParams) -> np.ndarray:
    """|phi(xi)| / xi, an upper bound on the integrand for every t."""
    xi = np.asarray(xi, dtype=np.float64)
    return np.exp(np.real(log_cf(xi, law))) / xi


def choose_truncation(t: float, law: TailLawParams, tolerance: float, growth: float = 2.0) -> float:
    """Cut-off L for the Gil-Pelaez integral.

    Doubles from ``max(1, 1/R)`` until the integrand bound at ``L`` and
    ``2L`` is below ``tolerance / (10 L)``.  The bound used is
    ``|phi(xi)| / xi``, which dominates the integrand for every ``t``; the
    result is therefore the same for all ``t`` and grows as the tolerance
    shrinks.
    """
    del t  # the envelope is uniform in t
    L = max(1.0, 1.0 / law.R)
    last = (math.nan, math.nan)
    for _ in range(MAX_DOUBLINGS + 1):
        env = cf_envelope(np.array([L, 2.0 * L]), law)
        bound = tolerance / (10.0 * L)
        if env[0] < bound and env[1] < bound:
            return L
        last = (float(env[0]), float(env[1]))
        L *= growth
    raise CdfConvergenceError(f"truncation search exceeded {MAX_DOUBLINGS} doublings", last)


CHERNOFF_REACH = 12.0
CHERNOFF_POINTS = 64


def log_mgf(theta_R: np.ndarray, law: TailLawParams) -> np.ndarray:
    """log E exp(theta X) at ``theta * R`` in ``[-12, 12]``.

    Equals ``s R**-s sum_{n>=1} x**n / (n! (n - s))`` with ``x = theta R``.
    """
    x = np.asarray(theta_R, dtype=np.float64)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for n in range(1, 80):
        term = term * x / n
        total += term / (n - law.s)
    return law.s * law.intensity * total


def chernoff_bounds(t: np.ndarray, law: TailLawParams) -> tuple[np.ndarray, np.ndarray]:
    """Upper bounds on ``F(t)`` and ``1 - F(t)`` from exponential moments.

    The Levy measure lives on (0, R], so every exponential moment is finite
    and ``P(X >= t) <= exp(K(theta) - theta t)`` for any ``theta > 0``.
    The bound is minimised over a grid of ``theta R`` in (0, 12].
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x = np.geomspace(1e-3, CHERNOFF_REACH, CHERNOFF_POINTS)
    up, down = log_mgf(x, law), log_mgf(-x, law)
    scaled = t[:, None] / law.R * x[None, :]
    upper_tail = np.exp(np.minimum(np.min(up[None, :] - scaled, axis=1), 0.0))
    lower_tail = np.exp(np.minimum(np.min(down[None, :] + scaled, axis=1), 0.0))
    return lower_tail, upper_tail


def _u_range(L: float, tolerance: float) -> float:
    return math.log(4.0 * L / tolerance) + 10.0


def _level_nodes(U: float, h0: float, level: int) -> tuple[np.ndarray, float]:
    """u-nodes first used at ``level`` and that level's mesh."""
    h = h0 / (1 << level)
    m_max = int(math.floor(U / h))
    if 2 * m_max + 1 > MAX_NODES_PER_LEVEL:
        raise CdfConvergenceError("mesh too fine for the node budget", (math.nan, math.nan))
    m = np.arange(-m_max, m_max + 1)
    if level > 0:
        m = m[m % 2 != 0]
    return m * h, h


def _map_nodes(u: np.ndarray, L: float) -> tuple[np.ndarray, np.ndarray]:
    """xi = L/2 (1 + tanh u) and its Jacobian L/2 sech^2 u, without cancellation."""
    xi = L / (1.0 + np.exp(-2.0 * u))
    jac = 0.5 * L / np.cosh(u) ** 2
    return xi, jac


def trapezoid_levels(f: Callable[[np.ndarray], np.ndarray], L: float, q: QuadratureConfig, levels: int) -> list[float]:
    """Estimates of the tanh-substituted trapezoid rule at meshes h0, h0/2, ..."""
    U = _u_range(L, q.tolerance)
    running = 0.0
    out = []
    for level in range(levels):
        u, h = _level_nodes(U, q.initial_mesh, level)
        xi, jac = _map_nodes(u, L)
        running += float(np.sum(jac * f(xi)))
        out.append(h * running)
    return out


def tanh_trapezoid(f: Callable[[np.ndarray], np.ndarray], L: float, q: QuadratureConfig) -> float:
    """Integral of ``f`` over (0, L) by the tanh-substituted trapezoid rule.

    ``f`` must accept an array of abscissae.  The mesh starts at
    ``q.initial_mesh`` and is halved, reusing earlier nodes, until two
    successive estimates differ by less than ``q.tolerance / 2``.
    """
    U = _u_range(L, q.tolerance)
    running = 0.0
    previous = math.nan
    for level in range(q.max_halvings + 1):
        u, h = _level_nodes(U, q.initial_mesh, level)
        xi, jac = _map_nodes(u, L)
        running += float(np.sum(jac * f(xi)))
        estimate = h * running
        if level > 0 and abs(estimate - previous) < q.tolerance / 2.0:
            return estimate
        if level == q.max_halvings:
            raise CdfConvergenceError("trapezoid rule did not converge", (previous, estimate))
        previous = estimate
    raise AssertionError("unreachable")


@numba.njit(cache=True)
def _build_kernel(u, L, s, R, intensity, gamma_neg, small_xi):
    """Node data for one level: xi, CDF and density coefficients, tiny-node sums."""
    n = u.size
    xi = np.empty(n)
    cdf_re = np.empty(n)
    cdf_im = np.empty(n)
    den_re = np.empty(n)
    den_im = np.empty(n)
    small_a = 0.0
    small_b = 0.0
    ok_all = True
    for j in range(n):
        e = math.exp(-2.0 * abs(u[j]))
        # xi = L / (1 + exp(-2u)), jac = L/2 sech^2 u, both without overflow
        if u[j] >= 0.0:
            x = L / (1.0 + e)
        else:
            x = L * e / (1.0 + e)
        jac = 2.0 * L * e / (1.0 + e) ** 2
        hv, ok = h_scalar(s, complex(0.0, -x * R), True, gamma_neg)
        ok_all = ok_all and ok
        c = intensity * s * hv
        ph = cmath.exp(c)
        xi[j] = x
        den_re[j] = jac * ph.real
        den_im[j] = jac * ph.imag
        if x < small_xi:
            small_a += jac * c.imag / x
            small_b += jac * (1.0 + c.real)
            cdf_re[j] = 0.0
            cdf_im[j] = 0.0
        else:
            cdf_re[j] = jac * ph.real / x
            cdf_im[j] = jac * ph.imag / x
    return xi, cdf_re, cdf_im, den_re, den_im, small_a, small_b, ok_all


@numba.njit(cache=True)
def _sum_kernel(ts, xi, cdf_re, cdf_im, den_re, den_im, small_a, small_b, out_cdf, out_den):
    """Per-t level sums of Im(e^{-it xi} phi)/xi and Re(e^{-it xi} phi)."""
    for i in range(ts.size):
        t = ts[i]
        a = 0.0
        b = 0.0
        for j in range(xi.size):
            ph = t * xi[j]
            c = math.cos(ph)
            sn = math.sin(ph)
            a += cdf_im[j] * c - cdf_re[j] * sn
            b += den_re[j] * c + den_im[j] * sn
        out_cdf[i] = a + small_a - t * small_b
        out_den[i] = b


@dataclass
class _Level:
    h: float
    xi: np.ndarray
    cdf_re: np.ndarray  # weighted Re(phi)/xi; zero at tiny nodes
    cdf_im: np.ndarray
    den_re: np.ndarray  # weighted phi, for the density
    den_im: np.ndarray
    small_a: float  # weighted sum of Im C / xi at tiny nodes
    small_b: float  # weighted sum of (1 + Re C) at tiny nodes

    def sums(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out_cdf = np.empty_like(t)
        out_den = np.empty_like(t)
        _sum_kernel(
            t, self.xi, self.cdf_re, self.cdf_im, self.den_re, self.den_im,
            self.small_a, self.small_b, out_cdf, out_den,
        )
        return out_cdf, out_den


@dataclass(frozen=True)
class PointEvaluation:
    """CDF and density at one point from :meth:`CdfEvaluator.evaluate_near`.

    ``error`` is the last successive-level difference on the CDF scale;
    ``converged`` says whether it reached the full tolerance.
    """

    cdf: float
    density: float
    error: float
    converged: bool


class CdfEvaluator:
    """Evaluates the CDF of one law at arbitrary points, reusing node data.

    The per-level node data is built lazily and shared by all evaluation
    points; a bounded memo keyed by ``t / R`` rounded to 1e-12 serves
    repeated queries.  Memoized points are evaluated at the rounded ``t`` so
    a hit and a recomputation agree exactly.  Instances are safe to share between
    threads.
    """

    MEMO_LIMIT = 1 << 16

    def __init__(self, law: TailLawParams, q: QuadratureConfig | None = None) -> None:
        self.law = law
        self.q = q or QuadratureConfig()
        self.cutoff = choose_truncation(0.0, law, self.q.tolerance, self.q.growth)
        self.u_range = _u_range(self.cutoff, self.q.tolerance)
        self._levels: list[_Level] = []
        self._memo: dict[int, float] = {}
        self._lock = threading.Lock()

    def _level(self, index: int) -> _Level:
        with self._lock:
            while len(self._levels) <= index:
                self._levels.append(self._build(len(self._levels)))
            return self._levels[index]

    def _build(self, level: int) -> _Level:
        u, h = _level_nodes(self.u_range, self.q.initial_mesh, level)
        law = self.law
        xi, cre, cim, dre, dim, sa, sb, ok = _build_kernel(
            u, self.cutoff, law.s, law.R, law.intensity, gamma_negative(law.s), SMALL_XI
        )
        if not ok:
            raise GammaConvergenceError("incomplete gamma evaluation failed while building nodes")
        return _Level(h, xi, cre, cim, dre, dim, float(sa), float(sb))

    def _integrals(self, t: np.ndarray) -> np.ndarray:
        """Gil-Pelaez integrals for a batch of t, each to its own convergence."""
        q = self.q
        running = np.zeros_like(t)
        previous = np.full_like(t, np.nan)
        result = np.full_like(t, np.nan)
        pending = np.arange(t.size)
        for level in range(q.max_halvings + 1):
            lv = self._level(level)
            part, _ = lv.sums(t[pending])
            running[pending] += part
            estimate = lv.h * running[pending]
            if level > 0:
                done = np.abs(estimate - previous[pending]) < q.tolerance / 2.0
                result[pending[done]] = estimate[done]
                previous[pending] = estimate
                pending = pending[~done]
                if pending.size == 0:
                    return result
            else:
                previous[pending] = estimate
        j = pending[0]
        raise CdfConvergenceError(
            f"trapezoid rule did not converge at t={t[j]!r}", (float(previous[j]), float(lv.h * running[j]))
        )

    def evaluate_near(self, t: float, target: float) -> PointEvaluation:
        """F(t) and the density at ``t``, refined only as far as needed.

        Levels are added until successive estimates agree to the full
        tolerance, or until the last two successive differences are below
        an eighth of ``|F(t) - target|``, which settles the side of
        ``target`` that ``t`` lies on.  Used by quantile searches.
        """
        if not t > 0.0:
            return PointEvaluation(0.0, 0.0, 0.0, True)
        q = self.q
        tt = np.array([float(t)])
        run_cdf = 0.0
        run_den = 0.0
        prev = math.nan
        prev_err = math.inf
        for level in range(q.max_halvings + 1):
            lv = self._level(level)
            a, b = lv.sums(tt)
            run_cdf += float(a[0])
            run_den += float(b[0])
            cdf = 0.5 - lv.h * run_cdf / math.pi
            if level > 0:
                err = abs(cdf - prev)
                full = err < q.tolerance / 2.0
                # coarse levels can agree by accident, so two differences must be small
                if full or max(err, prev_err) < abs(cdf - target) / 8.0:
                    density = max(0.0, lv.h * run_den / math.pi)
                    return PointEvaluation(min(1.0, max(0.0, cdf)), density, err, full)
                prev_err = err
            prev = cdf
        raise CdfConvergenceError(f"trapezoid rule did not converge at t={t!r}", (prev, cdf))

    def level_estimates(self, t: float) -> list[tuple[float, float]]:
        """``(h, F_h(t))`` for every level up to full convergence at ``t``."""
        q = self.q
        tt = np.array([float(t)])
        running = 0.0
        out: list[tuple[float, float]] = []
        for level in range(q.max_halvings + 1):
            lv = self._level(level)
            running += float(lv.sums(tt)[0][0])
            out.append((lv.h, 0.5 - lv.h * running / math.pi))
            if level > 0 and abs(out[-1][1] - out[-2][1]) < q.tolerance / 2.0:
                return out
        raise CdfConvergenceError(f"trapezoid rule did not converge at t={t!r}", (out[-2][1], out[-1][1]))

    def __call__(self, t: float) -> float:
        return self.evaluate(t)

    def evaluate(self, t: float) -> float:
        t = float(t)
        if not math.isfinite(t):
            if math.isnan(t):
                raise ValueError("t must not be NaN")
            return 0.0 if t < 0 else 1.0
        if t <= 0.0:
            return 0.0
        settled = self._settled(np.array([t]))[0]
        if not math.isnan(settled):
            return float(settled)
        key = round(t / self.law.R * 1e12)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        snapped = key * 1e-12 * self.law.R if key > 0 else t
        integral = float(self._integrals(np.array([snapped]))[0])
        value = min(1.0, max(0.0, 0.5 - integral / math.pi))
        with self._lock:
            if len(self._memo) >= self.MEMO_LIMIT:
                self._memo.clear()
            self._memo[key] = value
        return value

    def _settled(self, t: np.ndarray) -> np.ndarray:
        """0 or 1 where a Chernoff bound puts F within tolerance/8 of it, else NaN."""
        below, above = chernoff_bounds(t, self.law)
        cut = self.q.tolerance / 8.0
        return np.where(below <= cut, 0.0, np.where(above <= cut, 1.0, np.nan))

    def evaluate_many(self, ts) -> np.ndarray:
        """Vectorized :meth:`evaluate` (no memo, no snapping)."""
        t = np.asarray(ts, dtype=np.float64).ravel()
        out = np.zeros_like(t)
        pos = t > 0
        out[np.isposinf(t)] = 1.0
        pos &= np.isfinite(t)
        if pos.any():
            settled = np.full_like(t, np.nan)
            settled[pos] = self._settled(t[pos])
            known = ~np.isnan(settled)
            out[known] = settled[known]
            pos &= ~known
        if pos.any():
            integral = self._integrals(t[pos])
            out[pos] = np.clip(0.5 - integral / math.pi, 0.0, 1.0)
        return out.reshape(np.shape(ts))

    @property
    def node_count(self) -> int:
        return sum(lv.xi.size for lv in self._levels)


@functools.lru_cache(maxsize=256)
def cdf_evaluator(law: TailLawParams, q: QuadratureConfig = QuadratureConfig()) -> CdfEvaluator:
    return CdfEvaluator(law, q)


def evaluate_cdf(t: float, law: TailLawParams, q: QuadratureConfig = QuadratureConfig()) -> float:
    """F(t) of the truncated tail law, to within ``q.tolerance``.

    Returns exactly 0 for ``t <= 0`` (the law lives on the positive reals).
    """
    return cdf_evaluator(law, q).evaluate(t)
