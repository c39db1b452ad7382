import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from lp_sampler import harness
from lp_sampler.cdf import (
    CdfConvergenceError,
    CdfEvaluator,
    QuadratureConfig,
    cdf_evaluator,
    chernoff_bounds,
    choose_truncation,
    evaluate_cdf,
    log_mgf,
    tanh_trapezoid,
    trapezoid_levels,
)
from lp_sampler.limiting_cf import TailLawParams, cf, gil_pelaez_integrand
from lp_sampler.suites import halving_errors, halving_ratio, log_error_slope

Q = QuadratureConfig()
EPS = Q.tolerance
UNIT = TailLawParams(1.0, 1.0)
GRID_LAWS = [TailLawParams(p, R) for p in (0.5, 1.0, 1.5) for R in (0.05, 0.5, 1.0, 5.0)]


def quad_cdf(t, law):
    """Gil-Pelaez integral by adaptive quadrature, an independent route.

    Plain quadrature on (0, 1); Fourier-weighted quadrature (QUADPACK QAWF)
    on (1, inf) for the split Im(exp(-i t xi) phi) = cos(t xi) Im phi - sin(t xi) Re phi.
    Returns the value and the summed error estimates.
    """
    head, e0 = integrate.quad(lambda x: gil_pelaez_integrand(x, t, law), 0.0, 1.0, epsabs=1e-14, limit=500)
    c, e1 = integrate.quad(lambda x: cf(x, law).imag / x, 1.0, np.inf, weight="cos", wvar=t, limlst=200, epsabs=1e-13)
    s, e2 = integrate.quad(lambda x: cf(x, law).real / x, 1.0, np.inf, weight="sin", wvar=t, limlst=200, epsabs=1e-13)
    return 0.5 - (head + c - s) / math.pi, e0 + e1 + e2


def test_config_validation():
    for kwargs in [dict(tolerance=0.5), dict(tolerance=1e-15), dict(max_halvings=3), dict(initial_mesh=0.0), dict(growth=1.0)]:
        with pytest.raises(ValueError):
            QuadratureConfig(**kwargs)


def test_at_zero_and_below():
    assert evaluate_cdf(0.0, UNIT) == 0.0
    assert evaluate_cdf(-3.0, UNIT) == 0.0
    assert cdf_evaluator(UNIT).evaluate(-math.inf) == 0.0
    assert cdf_evaluator(UNIT).evaluate(math.inf) == 1.0
    with pytest.raises(ValueError):
        evaluate_cdf(math.nan, UNIT)


@pytest.mark.parametrize("law", GRID_LAWS, ids=str)
def test_far_right_is_one(law):
    assert evaluate_cdf(100.0 * law.mean, law) >= 1.0 - 10.0 * EPS


# points where the Fourier-weighted quadrature reports convergence
QUAD_POINTS = [
    (0.5, 5.0, 1.0), (0.5, 0.5, 0.3), (0.5, 0.05, 0.3),
    (1.0, 1.0, 0.3), (1.0, 1.0, 1.0), (1.0, 1.0, 2.5),
    (1.5, 0.5, 0.3), (1.5, 0.5, 1.0), (1.5, 0.5, 2.5),
]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("p,R,scale", QUAD_POINTS)
def test_matches_adaptive_quadrature(p, R, scale):
    law = TailLawParams(p, R)
    t = scale * law.mean
    oracle, error = quad_cdf(t, law)
    assert error <= 1e-10
    assert abs(evaluate_cdf(t, law) - oracle) <= EPS


def test_matches_limit_law_monte_carlo():
    rng = np.random.default_rng(11)
    samples = harness.limit_law_tail_sums(rng, 1.0, 1.0, 10**5)
    grid = np.quantile(samples, np.linspace(0.02, 0.98, 25))
    F = cdf_evaluator(UNIT).evaluate_many(grid)
    assert harness.sup_discrepancy(samples, grid, F) <= 0.01


@given(st.sampled_from(GRID_LAWS), st.lists(st.floats(0.0, 5.0), min_size=2, max_size=8))
def test_near_monotone(law, scales):
    t = np.sort(np.asarray(scales)) * law.mean
    F = cdf_evaluator(law).evaluate_many(t)
    assert np.all(np.diff(F) >= -2.0 * EPS)
    assert np.all((F >= 0.0) & (F <= 1.0))


@given(st.floats(0.01, 4.0))
def test_scalar_and_batch_agree(scale):
    ev = cdf_evaluator(UNIT)
    t = scale * UNIT.mean
    assert abs(ev.evaluate(t) - ev.evaluate_many([t])[0]) <= EPS


def test_memo_returns_identical_values():
    ev = CdfEvaluator(UNIT)
    first = ev.evaluate(0.73)
    assert ev.evaluate(0.73) == first
    assert CdfEvaluator(UNIT).evaluate(0.73) == first


def test_evaluate_near_converged_agrees():
    ev = CdfEvaluator(UNIT)
    pt = ev.evaluate_near(1.2, ev.evaluate(1.2))
    assert pt.converged
    assert abs(pt.cdf - ev.evaluate(1.2)) <= EPS
    assert pt.density > 0


def test_evaluate_near_settles_side_of_far_target():
    ev = CdfEvaluator(UNIT)
    pt = ev.evaluate_near(1.0, 0.999)
    assert pt.cdf < 0.999
    assert abs(pt.cdf - ev.evaluate(1.0)) < abs(pt.cdf - 0.999)


def test_density_matches_difference_quotient():
    ev = CdfEvaluator(UNIT)
    step = 1e-3
    slope = (ev.evaluate(1.0 + step) - ev.evaluate(1.0 - step)) / (2 * step)
    assert ev.evaluate_near(1.0, ev.evaluate(1.0)).density == pytest.approx(slope, abs=1e-5)


def test_log_mgf_matches_levy_integral():
    theta_R = 0.7
    oracle, _ = integrate.quad(lambda z: (math.exp(theta_R * z) - 1.0) * 0.5 * z**-1.5, 0.0, 1.0)
    assert log_mgf(np.array([theta_R]), UNIT)[0] == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("law", GRID_LAWS, ids=str)
def test_chernoff_bounds_are_bounds(law):
    t = law.mean * np.array([0.05, 0.3, 0.8, 1.5, 3.0, 6.0])
    below, above = chernoff_bounds(t, law)
    ev = cdf_evaluator(law)
    # converged trapezoid levels, which never consult the bounds
    F = np.array([ev.level_estimates(x)[-1][1] for x in t])
    assert np.all(F <= below + EPS)
    assert np.all(1.0 - F <= above + EPS)


def test_truncation_postcondition():
    L = choose_truncation(1.0, UNIT, EPS)
    xi = np.array([L, 2 * L])
    assert np.all(np.abs(gil_pelaez_integrand(xi, 1.0, UNIT)) < EPS / (10 * L))


@given(st.sampled_from(GRID_LAWS), st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_truncation_monotone_in_t(law, a, b):
    lo, hi = sorted((a, b))
    assert choose_truncation(hi, law, EPS) >= choose_truncation(lo, law, EPS)
    assert choose_truncation(-hi, law, EPS) >= choose_truncation(lo, law, EPS)


@given(st.sampled_from(GRID_LAWS), st.floats(1e-12, 1e-2))
def test_truncation_monotone_in_tolerance(law, tol):
    assert choose_truncation(1.0, law, tol / 2) >= choose_truncation(1.0, law, tol)


def test_trapezoid_zero_integrand():
    assert tanh_trapezoid(lambda xi: np.zeros_like(xi), 10.0, Q) == 0.0


def test_trapezoid_exponential():
    assert tanh_trapezoid(lambda xi: np.exp(-xi), 40.0, Q) == pytest.approx(1.0, abs=1e-9)


def test_trapezoid_exponential_halving_decay():
    estimates = trapezoid_levels(lambda xi: np.exp(-xi), 40.0, Q, 7)
    errors = [abs(v - (1.0 - math.exp(-40.0))) for v in estimates]
    assert halving_ratio(errors, floor=1e-13) <= 0.2


def test_trapezoid_non_convergence_reports_estimates():
    q = QuadratureConfig(tolerance=1e-12, max_halvings=4)
    with pytest.raises(CdfConvergenceError) as info:
        tanh_trapezoid(lambda xi: np.sin(1e4 * xi), 1.0, q)
    assert len(info.value.estimates) == 2


def test_unit_law_log_error_decreases_with_inverse_mesh():
    ev = CdfEvaluator(UNIT)
    levels = ev.level_estimates(UNIT.mean)
    errors = halving_errors([f for _, f in levels])
    inverse_mesh = [1.0 / h for h, _ in levels[: len(errors)]]
    assert log_error_slope(inverse_mesh, errors, EPS) < 0


def test_halving_ratio_helper():
    assert halving_ratio([1e-1, 5e-3, 1e-4, 1e-6]) == pytest.approx(0.02)
    assert halving_ratio([1e-1, 1e-3, 5e-4]) == pytest.approx(0.5)
    assert halving_ratio([1.0, 0.5]) == 0.0
