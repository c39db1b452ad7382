import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lp_sampler.randomness import Label, RandomTape
from lp_sampler.samplers import TailAggregate, sample_head
from lp_sampler.sketch import (
    NORM_SCALE,
    SketchState,
    VirtualIndex,
    column_contribution,
    estimate_all,
    estimate_entry,
    estimate_norm,
    estimate_slots,
    sketch_update,
)

TAU = 3
TAPE = RandomTape(77)
HEADS = [sample_head(TAPE.child(Label.AUX, 0), i, TAU, 1.0) for i in range(6)]
TAILS = [TailAggregate(0.25 * h.R) for h in HEADS]
updates = st.lists(st.tuples(st.integers(0, 5), st.integers(-50, 50)), max_size=12)


def build(updates_, k=16, r=3, cache=0):
    state = SketchState(TAPE, k, r, TAU, cache)
    for i, d in updates_:
        sketch_update(state, i, d, HEADS[i], TAILS[i])
    return state


@given(st.integers(0, 10**6), st.integers(0, TAU), st.integers(1, 20))
def test_virtual_index_round_trip(i, slot, tau):
    slot = min(slot, tau)
    vi = VirtualIndex(i, slot)
    code = vi.encode(tau)
    assert VirtualIndex.decode(code, tau) == vi
    assert vi.is_tail(tau) == (slot == tau)


def test_virtual_index_codes_are_distinct():
    codes = {VirtualIndex(i, j).encode(TAU) for i in range(10) for j in range(TAU + 1)}
    assert codes == set(range(10 * (TAU + 1)))
    with pytest.raises(ValueError):
        VirtualIndex(0, TAU + 1).encode(TAU)


def test_state_validation():
    with pytest.raises(ValueError):
        SketchState(TAPE, 0, 1, 1)


def test_zero_delta_leaves_cells():
    state = build([(1, 4)])
    before = state.cells.copy()
    sketch_update(state, 2, 0, HEADS[2], TAILS[2])
    np.testing.assert_array_equal(state.cells, before)


def test_update_and_reverse_cancel():
    state = build([(3, 2)])
    before = state.cells.copy()
    sketch_update(state, 1, 5, HEADS[1], TAILS[1])
    sketch_update(state, 1, -5, HEADS[1], TAILS[1])
    assert np.max(np.abs(state.cells - before)) <= 1e-9


@given(updates, updates)
def test_linearity(u, w):
    merged = {}
    for i, d in u + w:
        merged[i] = merged.get(i, 0) + d
    a = build(u + w)
    b = build(sorted(merged.items()))
    assert np.max(np.abs(a.cells - b.cells), initial=0.0) <= 1e-9


def test_update_formula():
    state = build([(2, 3)], k=4, r=2)
    col = state.column(2)
    expected = 3 * (col[:, :, :TAU] @ np.asarray(HEADS[2].values) + col[:, :, TAU] * math.sqrt(TAILS[2].sigma_sq))
    np.testing.assert_allclose(state.cells, expected, rtol=1e-14)
    np.testing.assert_allclose(column_contribution(col, HEADS[2], TAILS[2]) * 3, expected, rtol=1e-14)


def test_head_size_mismatch_rejected():
    state = SketchState(TAPE, 4, 1, TAU + 1)
    with pytest.raises(ValueError):
        sketch_update(state, 0, 1, HEADS[0], TAILS[0])


def test_columns_are_replayed_not_stored():
    a, b = SketchState(TAPE, 8, 2, TAU), SketchState(TAPE, 8, 2, TAU, column_cache=2)
    for i in (0, 1, 2, 0, 1):
        np.testing.assert_array_equal(a.column(i), b.column(i))
    assert len(b._cache) == 2


def test_empty_sketch_estimates_zero():
    state = SketchState(TAPE, 8, 3, TAU)
    assert estimate_entry(state, VirtualIndex(0, 1)) == 0.0
    assert estimate_norm(state) == 0.0
    assert estimate_all(state, 0).shape == (0, TAU)


def test_tail_slot_not_estimable():
    with pytest.raises(ValueError):
        estimate_entry(build([]), VirtualIndex(0, TAU))
    with pytest.raises(ValueError):
        estimate_entry(build([]), VirtualIndex(0, TAU + 2))


def test_entry_estimate_formula():
    state = build([(0, 2), (4, -1)], k=8, r=3)
    col = state.column(4)[:, :, 1]
    per_rep = np.sum(col * state.cells, axis=1) / 8
    assert estimate_entry(state, VirtualIndex(4, 1)) == float(np.median(per_rep))


def test_batched_estimates_agree():
    state = build([(0, 2), (1, -3), (5, 7)], k=16, r=5)
    all_ = estimate_all(state, 6)
    subset = estimate_all(state, [5, 1])
    for i in range(6):
        np.testing.assert_allclose(all_[i], estimate_slots(state, i), rtol=1e-12, atol=1e-14)
        for j in range(TAU):
            assert all_[i, j] == pytest.approx(estimate_entry(state, VirtualIndex(i, j)), rel=1e-12, abs=1e-14)
    np.testing.assert_allclose(subset, all_[[5, 1]], rtol=1e-12, atol=1e-14)


def test_norm_is_scaled_median():
    state = build([(0, 1), (3, 2)], k=8, r=3)
    assert estimate_norm(state) == NORM_SCALE * float(np.median(np.abs(state.cells)))


@pytest.mark.parametrize("c", [2, 3, 17])
def test_norm_scales_with_stream(c):
    x = [(0, 1), (2, -4), (5, 3)]
    base = estimate_norm(build(x))
    scaled = estimate_norm(build([(i, c * d) for i, d in x]))
    assert scaled == pytest.approx(c * base, rel=1e-12)


def test_single_entry_error_frequency_small():
    head = HEADS[0]
    tail = TailAggregate(0.0)
    c = 5.0
    k = 64
    hits = 0
    for sd in range(1000):
        state = SketchState(RandomTape(sd), k, 1, TAU)
        sketch_update(state, 0, 5, head, tail)
        est = estimate_entry(state, VirtualIndex(0, 0))
        norm = c * math.sqrt(sum(v * v for v in head.values))
        hits += abs(est - c * head.values[0]) <= 4 / math.sqrt(k) * norm
    assert hits / 1000 >= 0.75
