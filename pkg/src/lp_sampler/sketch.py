"""Dense Gaussian CountSketch over the per-coordinate virtual vector.

Coordinate ``i`` owns ``tau + 1`` virtual entries: its head values
``v_1..v_tau`` (scaled by ``x_i``) and one tail entry whose contribution to
each row is a Gaussian with variance ``sigma_sq`` (scaled by ``x_i``).  The
sketch keeps ``r`` independent repetitions of ``k`` rows.  Column entries
are regenerated from the tape whenever they are needed.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .randomness import Label, RandomTape
from .samplers import HeadStatistics, TailAggregate

NORM_SCALE = 1.25


@dataclass(frozen=True)
class VirtualIndex:
    """Head slot ``0..tau-1`` or the tail slot ``tau`` of coordinate ``i``."""

    i: int
    slot: int

    def encode(self, tau: int) -> int:
        if not 0 <= self.slot <= tau:
            raise ValueError(f"slot {self.slot} outside [0, {tau}]")
        return self.i * (tau + 1) + self.slot

    @classmethod
    def decode(cls, code: int, tau: int) -> "VirtualIndex":
        i, slot = divmod(int(code), tau + 1)
        return cls(i, slot)

    def is_tail(self, tau: int) -> bool:
        return self.slot == tau


class SketchState:
    """``r x k`` cells of a dense Gaussian sketch tied to one tape.

    ``column_cache`` keeps up to that many regenerated columns in memory;
    with 0 every access regenerates, which is the streaming configuration.
    """

    def __init__(self, tape: RandomTape, k: int, r: int, tau: int, column_cache: int = 0) -> None:
        if k < 1 or r < 1 or tau < 1:
            raise ValueError("k, r and tau must be positive")
        self.tape = tape
        self.k, self.r, self.tau = int(k), int(r), int(tau)
        self.cells = np.zeros((self.r, self.k))
        self._cache_limit = int(column_cache)
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def column(self, i: int) -> np.ndarray:
        """Gaussians of coordinate ``i`` shaped ``(r, k, tau + 1)``."""
        hit = self._cache.get(i)
        if hit is not None:
            self._cache.move_to_end(i)
            return hit
        size = self.r * self.k * (self.tau + 1)
        col = self.tape.gaussians([(Label.COORDINATE, i), (Label.SKETCH, 0)], size)
        col = col.reshape(self.r, self.k, self.tau + 1)
        if self._cache_limit > 0:
            self._cache[i] = col
            if len(self._cache) > self._cache_limit:
                self._cache.popitem(last=False)
        return col

    def copy_empty(self) -> "SketchState":
        return SketchState(self.tape, self.k, self.r, self.tau, self._cache_limit)


def column_contribution(col: np.ndarray, head: HeadStatistics, tail: TailAggregate) -> np.ndarray:
    """``G z_i`` for unit ``x_i``: head slots weighted by ``v_j``, tail by ``sqrt(sigma_sq)``."""
    tau = col.shape[2] - 1
    if head.tau != tau:
        raise ValueError(f"head has {head.tau} values, sketch expects {tau}")
    values = np.asarray(head.values)
    return col[:, :, :tau] @ values + col[:, :, tau] * np.sqrt(tail.sigma_sq)


def sketch_update(state: SketchState, i: int, delta: int, head: HeadStatistics, tail: TailAggregate) -> None:
    if delta == 0:
        return
    state.cells += delta * column_contribution(state.column(i), head, tail)


def estimate_slots(state: SketchState, i: int) -> np.ndarray:
    """Median-over-repetitions estimates of the ``tau`` head entries of ``i``."""
    col = state.column(i)[:, :, : state.tau]
    per_rep = np.einsum("akj,ak->aj", col, state.cells) / state.k
    return np.median(per_rep, axis=0)


def estimate_entry(state: SketchState, vi: VirtualIndex) -> float:
    if vi.is_tail(state.tau):
        raise ValueError("tail slots have no explicit column and cannot be estimated")
    if not 0 <= vi.slot < state.tau:
        raise ValueError(f"slot {vi.slot} outside [0, {state.tau})")
    col = state.column(vi.i)[:, :, vi.slot]
    per_rep = np.sum(col * state.cells, axis=1) / state.k
    return float(np.median(per_rep))


def estimate_all(state: SketchState, coordinates) -> np.ndarray:
    """Estimates for every head slot of ``coordinates`` (a count or a
    sequence of column indices), shape ``(len, tau)``."""
    if isinstance(coordinates, (int, np.integer)):
        coordinates = range(int(coordinates))
    if len(coordinates) == 0:
        return np.zeros((0, state.tau))
    cols = np.stack([state.column(i)[:, :, : state.tau] for i in coordinates])
    per_rep = np.einsum("iakj,ak->aij", cols, state.cells) / state.k
    return np.median(per_rep, axis=0)


def estimate_norm(state: SketchState) -> float:
    """``1.25 * median |cell|``, a 2-approximation of the virtual vector's norm."""
    return NORM_SCALE * float(np.median(np.abs(state.cells)))
