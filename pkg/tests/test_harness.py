import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from lp_sampler import harness
from lp_sampler.limiting_cf import TailLawParams
from lp_sampler.randomness import RandomTape


def test_brute_force_without_tail():
    s = harness.brute_force_finite_k(RandomTape(0), 1.0, 5, 5)
    assert s.tail_sq == 0.0
    assert list(s.head) == sorted(s.head, reverse=True)
    with pytest.raises(ValueError):
        harness.brute_force_finite_k(RandomTape(0), 1.0, 4, 5)


def test_brute_force_structure():
    s = harness.brute_force_finite_k(RandomTape(1), 0.8, 1000, 10)
    assert len(s.head) == 10 and s.k == 1000
    assert s.tail_sq > 0 and s.tail_sq < 10 * s.head[-1] ** 2 * 1000


def test_literal_and_fast_oracles_agree():
    p, k, tau, trials = 1.2, 2000, 4, 4000
    tape = RandomTape(2)
    literal = [harness.brute_force_finite_k(tape, p, k, tau, trial) for trial in range(trials)]
    head, tail = harness.finite_k_joint(np.random.default_rng(2), p, k, tau, trials)
    for j in range(tau):
        assert stats.ks_2samp([s.head[j] for s in literal], head[:, j]).pvalue > 1e-3
    assert stats.ks_2samp([s.tail_sq for s in literal], tail).pvalue > 1e-3


def test_max_stability_of_fast_oracle():
    head, _ = harness.finite_k_joint(np.random.default_rng(3), 1.0, 10**5, 2, 10**5)
    assert np.mean(1.0 / head[:, 0]) == pytest.approx(1.0, abs=0.02)


@given(st.floats(-3.0, 1.0), st.floats(1e-3, 1e4))
def test_scaled_upper_gamma(b, x):
    ref = float(mpmath.exp(x) * mpmath.gammainc(b, x))
    assert harness.scaled_upper_gamma(b, np.array([x]))[0] == pytest.approx(ref, rel=1e-9)


def test_remainder_moments_by_quadrature():
    c, k, power = 3.0, 50.0, 2.0
    m1, var = harness.remainder_moments(np.array([c]), k, power)
    e1, _ = integrate.quad(lambda x: (c + k * x) ** -power * math.exp(-x), 0, np.inf)
    e2, _ = integrate.quad(lambda x: (c + k * x) ** (-2 * power) * math.exp(-x), 0, np.inf)
    assert m1[0] == pytest.approx(e1, rel=1e-10)
    assert var[0] == pytest.approx(e2 - e1**2, rel=1e-8)


@pytest.mark.parametrize("p,R", [(0.5, 1.0), (1.0, 0.5), (1.5, 5.0)])
def test_limit_law_moments(p, R):
    law = TailLawParams(p, R)
    x = harness.limit_law_tail_sums(np.random.default_rng(4), p, R, 2 * 10**5)
    se = math.sqrt(law.variance / x.size)
    assert abs(x.mean() - law.mean) <= 5 * se
    assert x.var() == pytest.approx(law.variance, rel=0.05)


@pytest.mark.parametrize("p,R", [(1.0, 1.0), (1.5, 0.5)])
def test_finite_k_tail_mean_matches_deficit(p, R):
    law = TailLawParams(p, R)
    k = 10**4
    x = harness.finite_k_tail_sums(np.random.default_rng(5), p, R, k, 2 * 10**5)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - (law.mean - harness.finite_k_mean_deficit(p, R, k))) <= 5 * se


def test_finite_k_deficit_shrinks():
    d = [harness.finite_k_mean_deficit(1.5, 1.0, k) for k in (10**3, 10**5, 10**7)]
    assert d[0] > d[1] > d[2] > 0


def test_exact_distribution_examples():
    np.testing.assert_allclose(harness.exact_lp_distribution([1, 1], 0.7), [0.5, 0.5])
    np.testing.assert_allclose(harness.exact_lp_distribution([2, 1], 1.0), [2 / 3, 1 / 3])
    assert harness.exact_lp_distribution([16] + [1] * 15, 1.0)[0] == pytest.approx(16 / 31)
    np.testing.assert_allclose(harness.exact_lp_distribution([1, -2], 1.0), [1 / 3, 2 / 3])
    with pytest.raises(ValueError):
        harness.exact_lp_distribution([0, 0], 1.0)


def test_chi_square_examples():
    r = harness.chi_square_test([200, 100], [2 / 3, 1 / 3])
    assert r.passed and r.statistic == pytest.approx(0.0, abs=1e-12) and r.dof == 1
    assert not harness.chi_square_test([10**5, 0], [0.5, 0.5]).passed
    with pytest.raises(harness.ExpectedCountError):
        harness.chi_square_test([10, 10], [0.5, 0.5])
    with pytest.raises(ValueError):
        harness.chi_square_test([10, 10], [0.7, 0.7])


def test_chi_square_calibration():
    rng = np.random.default_rng(6)
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    passes = sum(harness.chi_square_test(rng.multinomial(5000, probs), probs).passed for _ in range(1000))
    assert passes / 1000 >= 0.98


def test_ks_at_exact_quantiles():
    n = 1000
    x = stats.norm.ppf(np.arange(1, n + 1) / (n + 1))
    assert harness.ks_statistic(x, stats.norm.cdf) <= 1.0 / n


def test_ks_constant_samples():
    assert harness.ks_statistic(np.zeros(100), stats.norm.cdf) >= 0.5
    with pytest.raises(ValueError):
        harness.ks_statistic([], stats.norm.cdf)


def test_ks_asymptotic_quantile():
    rng = np.random.default_rng(7)
    n = 10**6
    within = sum(harness.ks_statistic(np.sort(rng.random(n)), lambda u: u) <= 1.63 / math.sqrt(n) for _ in range(100))
    assert within >= 99


def test_two_sample_ks_and_tvd():
    assert harness.two_sample_ks([1, 2, 3], [1, 2, 3]) == 0.0
    assert harness.tvd([1, 1], [0.5, 0.5]) == 0.0
    assert harness.tvd([1, 0], [0.5, 0.5]) == 0.5


def test_sup_discrepancy():
    samples = np.arange(10.0)
    grid = np.array([-1.0, 4.5, 20.0])
    assert harness.sup_discrepancy(samples, grid, np.array([0.0, 0.5, 1.0])) == 0.0
    assert harness.sup_discrepancy(samples, grid, np.array([0.1, 0.5, 1.0])) == pytest.approx(0.1)


def test_oracles_are_seed_deterministic():
    a = harness.finite_k_tail_sums(np.random.default_rng(9), 1.0, 1.0, 10**4, 50)
    b = harness.finite_k_tail_sums(np.random.default_rng(9), 1.0, 1.0, 10**4, 50)
    np.testing.assert_array_equal(a, b)
    t1 = harness.brute_force_finite_k(RandomTape(3), 1.0, 100, 3, 7)
    assert t1 == harness.brute_force_finite_k(RandomTape(3), 1.0, 100, 3, 7)


def test_oracle_does_not_import_production_samplers():
    import ast
    import inspect

    tree = ast.parse(inspect.getsource(harness))
    imported = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom)}
    assert imported <= {"__future__", "dataclasses", "typing", "scipy", "randomness"}
