import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from lp_sampler import harness
from lp_sampler.cdf import CdfEvaluator, QuadratureConfig, cdf_evaluator
from lp_sampler.limiting_cf import TailLawParams
from lp_sampler.randomness import Label, RandomTape
from lp_sampler.samplers import (
    COMPOSE_MIN_INTENSITY,
    Y_CLAMP,
    HeadStatistics,
    TailAggregate,
    clamp_uniform,
    head_from_exponentials,
    invert_cdf,
    round_to_bits,
    sample_head,
    sample_head_ppp_region,
    sample_tail_composed,
    sample_tail_sum,
    tail_quantile_table,
)

Q = QuadratureConfig()
UNIT = TailLawParams(1.0, 1.0)


def test_scripted_head(scripted_tape):
    head = sample_head(scripted_tape([0.5, 1.0]), 0, 2, 1.0)
    assert head.arrivals == (0.5, 1.5)
    assert head.values[0] == pytest.approx(2.0)
    assert head.values[1] == pytest.approx(0.666667, abs=1e-6)
    assert head.R == pytest.approx(0.444444, abs=1e-6)


@given(st.integers(0, 10**6), st.integers(2, 40), st.floats(0.1, 1.9))
def test_head_structure(i, tau, p):
    head = sample_head(RandomTape(5), i, tau, p)
    v = np.asarray(head.values)
    assert head.tau == tau
    assert np.all(np.diff(v) < 0)
    np.testing.assert_allclose(v, np.asarray(head.arrivals) ** (-1.0 / p), rtol=1e-15)
    assert head.R == v[-1] ** 2


def test_head_is_deterministic():
    assert sample_head(RandomTape(3), 9, 6, 0.7) == sample_head(RandomTape(3), 9, 6, 0.7)
    assert sample_head(RandomTape(3), 9, 6, 0.7) != sample_head(RandomTape(3), 10, 6, 0.7)


def test_head_argument_checks():
    with pytest.raises(ValueError):
        sample_head(RandomTape(0), 0, 1, 1.0)
    with pytest.raises(ValueError):
        sample_head(RandomTape(0), 0, 3, 2.0)
    with pytest.raises(ValueError):
        HeadStatistics((1.0,), ())
    with pytest.raises(ValueError):
        TailAggregate(-1.0)


def test_max_stability_small():
    tape = RandomTape(8)
    x = np.array([sample_head(tape, i, 2, 1.3).values[0] ** -1.3 for i in range(20000)])
    assert stats.kstest(x, "expon").pvalue > 1e-3


def test_ppp_far_threshold_is_empty():
    tape = RandomTape(4)
    empty = sum(not sample_head_ppp_region(tape, 1e6, 1.0, trial) for trial in range(10**5))
    assert empty / 10**5 >= 1.0 - 2e-6


def test_ppp_points_above_threshold_and_sorted():
    tape = RandomTape(4)
    for trial in range(200):
        pts = sample_head_ppp_region(tape, 0.3, 1.0, trial)
        assert all(x >= 0.3 for x in pts)
        assert pts == sorted(pts, reverse=True)
    with pytest.raises(ValueError):
        sample_head_ppp_region(tape, 0.0, 1.0)


def test_ppp_mean_count():
    tape = RandomTape(6)
    counts = [len(sample_head_ppp_region(tape, 0.5, 1.0, t)) for t in range(20000)]
    assert np.mean(counts) == pytest.approx(2.0, rel=0.03)


@pytest.mark.parametrize(
    "x,bits,expected",
    [(1.0, 8, 1.0), (1.0 + 2**-9, 8, 1.0), (1.0 + 3 * 2**-9, 8, 1.0 + 2**-7), (0.0, 8, 0.0), (-3.3, 30, round(-3.3 * 2**28) / 2**28)],
)
def test_round_to_bits(x, bits, expected):
    assert round_to_bits(x, bits) == expected


@given(st.floats(1e-300, 1e300), st.integers(8, 48))
def test_round_to_bits_relative_error(x, bits):
    assert abs(round_to_bits(x, bits) - x) <= 2.0 ** -bits * abs(x)


def test_clamp_uniform():
    assert clamp_uniform(0.0) == Y_CLAMP
    assert clamp_uniform(1.0) == 1.0 - Y_CLAMP
    assert clamp_uniform(0.3) == 0.3


@pytest.mark.parametrize("y", [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6])
def test_inversion_postcondition(y):
    ev = cdf_evaluator(UNIT, Q)
    x = invert_cdf(ev, y, 30)
    assert abs(ev.evaluate(x) - y) <= 4 * Q.tolerance + 2.0**-28


def test_inversion_of_clamped_low_draw():
    ev = CdfEvaluator(TailLawParams(1.0, 1.0))
    x = invert_cdf(ev, Y_CLAMP, 30)
    assert ev.evaluate(x) <= 2.0**-39


@given(st.floats(1e-4, 1 - 1e-4), st.floats(1e-4, 1 - 1e-4))
def test_inversion_monotone(a, b):
    ev = cdf_evaluator(UNIT, Q)
    lo, hi = sorted((a, b))
    assert invert_cdf(ev, lo, 30) <= invert_cdf(ev, hi, 30) + 2.0**-28


def test_tail_sum_rounded_and_deterministic():
    tape = RandomTape(21)
    a = sample_tail_sum(tape, UNIT, 20, Q)
    assert a == sample_tail_sum(RandomTape(21), UNIT, 20, Q)
    assert round_to_bits(a.sigma_sq, 20) == a.sigma_sq
    with pytest.raises(ValueError):
        sample_tail_sum(tape, UNIT, 7, Q)


def test_tail_sum_small_sample_ks():
    tape = RandomTape(22)
    draws = [sample_tail_sum(tape, UNIT, 30, Q, key=[(Label.TRIAL, j), (Label.TAIL, 0)]).sigma_sq for j in range(400)]
    ev = cdf_evaluator(UNIT, Q)
    assert stats.kstest(draws, lambda x: ev.evaluate_many(x)).pvalue > 1e-3


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5])
def test_quantile_table_matches_direct_inversion(p):
    table = tail_quantile_table(p, Q)
    for lam in (8.0, 20.0, 127.0):
        law = TailLawParams(p, lam ** (-2.0 / p))
        ev = cdf_evaluator(law, Q)
        for y in (0.01, 0.5, 0.99):
            assert abs(ev.evaluate(table.quantile(lam, y)) - y) <= 2e-6
    assert not table.covers(4.0)
    with pytest.raises(ValueError):
        table.quantile(200.0, 0.5)


def test_quantile_table_is_shared():
    assert tail_quantile_table(1.0) is tail_quantile_table(1.0, QuadratureConfig())


def test_composed_tail_with_large_head_uses_head_level(scripted_tape):
    # head arrivals already beyond the composition level: no extra arrivals
    head = head_from_exponentials([5.0, 5.0], 1.0)
    assert head.arrivals[-1] >= COMPOSE_MIN_INTENSITY
    tape = RandomTape(30)
    composed = sample_tail_composed(tape, 0, head, 1.0, 30, Q, None)
    direct = sample_tail_sum(tape, TailLawParams(1.0, head.R), 30, Q, key=[(Label.COORDINATE, 0), (Label.TAIL, 0)])
    assert composed == direct


def test_composed_tail_against_limit_law():
    p, tau = 1.0, 2
    tape = RandomTape(31)
    table = tail_quantile_table(p, Q)
    ratios, R_values = [], []
    for i in range(3000):
        head = sample_head(tape, i, tau, p)
        tail = sample_tail_composed(tape, i, head, p, 30, Q, table)
        ratios.append(tail.sigma_sq / head.R)
    # oracle: conditional on the head the remainder is the truncated law; compare the mixture
    rng = np.random.default_rng(31)
    gam = rng.gamma(tau, size=3000)
    oracle = [harness.limit_law_tail_sums(rng, p, g ** (-2.0 / p), 1)[0] / g ** (-2.0 / p) for g in gam]
    assert stats.ks_2samp(ratios, oracle).pvalue > 1e-3
