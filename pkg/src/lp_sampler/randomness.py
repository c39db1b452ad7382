"""Deterministic, hierarchically keyed random tape.

Every random quantity used by the sampler is addressed by a key path, a
sequence of ``(label, index)`` pairs such as
``((INSTANCE, 3), (COORDINATE, 17), (SKETCH, 0))``.  The path and the master
seed are hashed into a 128-bit Philox key; the values of a path are the
Philox counter stream starting at zero, so position ``q`` of a path is
always the same number no matter how many values are requested.

Replaying a path therefore regenerates the same values bit for bit, which
is what lets a stream update recompute a coordinate's sketch column instead
of storing it.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from collections import Counter
from enum import IntEnum
from typing import Iterable, Sequence, Tuple

import numpy as np

KeyPath = Tuple[Tuple[int, int], ...]

GAUSSIAN_CLIP = 12.0
_TWO_POW_M53 = 2.0 ** -53


class Label(IntEnum):
    """Labels used in key paths.  Values are part of the on-tape layout."""

    INSTANCE = 1
    COORDINATE = 2
    HEAD = 3
    TAIL = 4
    TAIL_ARRIVALS = 5
    SKETCH = 6
    TEST = 7
    PPP_COUNT = 8
    PPP_LOCATIONS = 9
    TRIAL = 10
    AUX = 11


def _normalize(path: Iterable[Sequence[int]]) -> KeyPath:
    out = []
    for item in path:
        label, index = item
        out.append((int(label), int(index)))
    return tuple(out)


def philox_key(seed: int, path: KeyPath) -> int:
    """128-bit Philox key for ``(seed, path)``.

    The encoding is length-prefixed and fixed-width, so distinct paths never
    produce the same byte string.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    payload = struct.pack("<QI", seed, len(path))
    if path:
        flat = [v for pair in path for v in pair]
        payload += struct.pack("<" + "Iq" * len(path), *flat)
    digest = hashlib.blake2b(payload, digest_size=16, person=b"lp-sampler-tape").digest()
    return int.from_bytes(digest, "little")


class DerivationCounter:
    """Counts derived values, grouped by the role label of the path."""

    def __init__(self) -> None:
        self._counts: Counter[int] = Counter()
        self._lock = threading.Lock()

    def add(self, role: int, amount: int) -> None:
        with self._lock:
            self._counts[role] += amount

    def total(self) -> int:
        return sum(self._counts.values())

    def by_role(self, role: int) -> int:
        return self._counts[int(role)]

    def snapshot(self) -> dict[int, int]:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


_local = threading.local()


def _generator() -> np.random.Generator:
    gen = getattr(_local, "generator", None)
    if gen is None:
        gen = np.random.Generator(np.random.Philox(key=0))
        _local.generator = gen
    return gen


def _positioned(key: int) -> np.random.Generator:
    """Thread-local Philox generator rewound to counter 0 under ``key``."""
    gen = _generator()
    gen.bit_generator.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([key & 0xFFFFFFFFFFFFFFFF, key >> 64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }
    return gen


def raw_to_uniform(raw: np.ndarray) -> np.ndarray:
    """Map 64-bit words to 53-bit uniforms strictly inside (0, 1).

    The top 53 bits give ``m * 2**-53``; the largest value is ``1 - 2**-53``
    and ``m = 0`` is moved to ``2**-54``.
    """
    u = (raw >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
    u[u == 0.0] = 0.5 * _TWO_POW_M53
    return u


class RandomTape:
    """Replayable source of uniforms, exponentials and Gaussians.

    A tape is a master seed plus a key-path prefix.  ``child`` extends the
    prefix; all children share the parent's derivation counter.
    """

    def __init__(
        self,
        seed: int,
        prefix: Iterable[Sequence[int]] = (),
        counter: DerivationCounter | None = None,
    ) -> None:
        self.seed = int(seed)
        self.prefix: KeyPath = _normalize(prefix)
        self.counter = counter if counter is not None else DerivationCounter()
        philox_key(self.seed, self.prefix)  # validates the seed early

    def child(self, label: int, index: int) -> "RandomTape":
        return RandomTape(self.seed, self.prefix + ((int(label), int(index)),), self.counter)

    def _full(self, path: Iterable[Sequence[int]]) -> KeyPath:
        return self.prefix + _normalize(path)

    def _record(self, full: KeyPath, size: int) -> None:
        role = full[-1][0] if full else 0
        self.counter.add(role, size)

    def raw(self, path: Iterable[Sequence[int]], size: int) -> np.ndarray:
        full = self._full(path)
        gen = _positioned(philox_key(self.seed, full))
        self._record(full, size)
        return gen.bit_generator.random_raw(size)

    def uniforms(self, path: Iterable[Sequence[int]], size: int) -> np.ndarray:
        return raw_to_uniform(self.raw(path, size))

    def exponentials(self, path: Iterable[Sequence[int]], size: int) -> np.ndarray:
        return -np.log(self.uniforms(path, size))

    def gaussians(self, path: Iterable[Sequence[int]], size: int) -> np.ndarray:
        """Standard normals, clipped to +-12.

        Values come from the ziggurat method driven by the path's Philox
        stream, so element ``q`` depends only on the path and ``q``.
        """
        full = self._full(path)
        gen = _positioned(philox_key(self.seed, full))
        self._record(full, size)
        out = gen.standard_normal(size)
        np.clip(out, -GAUSSIAN_CLIP, GAUSSIAN_CLIP, out=out)
        return out

    def __repr__(self) -> str:
        return f"RandomTape(seed={self.seed}, prefix={self.prefix})"


def exponential_from_uniform(u: float) -> float:
    return -math.log(u)


def derive_uniform(tape: RandomTape, key: Iterable[Sequence[int]]) -> float:
    return float(tape.uniforms(key, 1)[0])


def derive_exponential(tape: RandomTape, key: Iterable[Sequence[int]]) -> float:
    return exponential_from_uniform(derive_uniform(tape, key))


def derive_gaussian(tape: RandomTape, key: Iterable[Sequence[int]]) -> float:
    return float(tape.gaussians(key, 1)[0])
