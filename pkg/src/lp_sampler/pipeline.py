"""Streaming L_p sampler: ingest turnstile updates, then sample an index.

Each instance scales every coordinate by its head of inverse-exponential
scalings, sketches the resulting virtual vector, and at the end picks the
largest estimated head entry if a statistical test says the top two are
well separated.  Instances run in a fixed order and the first one that
passes decides the output.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .cdf import QuadratureConfig
from .limiting_cf import TailLawParams
from .randomness import Label, RandomTape, derive_uniform
from .samplers import (
    HeadStatistics,
    TailAggregate,
    sample_head,
    sample_tail_composed,
    sample_tail_sum,
    tail_quantile_table,
)
from .sketch import SketchState, estimate_all, estimate_norm, sketch_update

EPS_TEST_CAP = 0.02
CACHE_FLOATS_PER_SKETCH = 1 << 22
DEFAULT_MAGNITUDE_BOUND = 10**9
TAIL_METHODS = ("table", "exact")


def log_size(n: int) -> float:
    return math.log2(max(n, 4))


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler parameters.  ``None`` fields take their size-dependent defaults.

    With ``L = ceil(log2 max(n, 4))``: ``tau = 3L``, ``r = 2L + 1``,
    ``k = ceil(16 log2 max(n, 4))``, ``eps_test = 1 / (500 sqrt(log2 max(n, 4)))``
    and ``instances = ceil(4 ln(1/delta))``.
    """

    n: int
    p: float
    delta: float = 0.05
    tau: Optional[int] = None
    k: Optional[int] = None
    r: Optional[int] = None
    eps_test: Optional[float] = None
    L_bits: int = 30
    instances: Optional[int] = None
    seed: int = 0
    tail_method: str = "table"
    second_condition: bool = True
    magnitude_bound: int = DEFAULT_MAGNITUDE_BOUND
    tail_memo_limit: int = 1 << 16
    column_cache: int = 256
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not 0.0 < self.p < 2.0:
            raise ValueError(f"p must lie in (0, 2), got {self.p}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.tail_method not in TAIL_METHODS:
            raise ValueError(f"tail_method must be one of {TAIL_METHODS}, got {self.tail_method!r}")
        if not 8 <= self.L_bits <= 48:
            raise ValueError(f"L_bits must lie in [8, 48], got {self.L_bits}")
        levels = math.ceil(log_size(self.n))
        defaults = {
            "tau": 3 * levels,
            "r": 2 * levels + 1,
            "k": math.ceil(16 * log_size(self.n)),
            "eps_test": 1.0 / (500.0 * math.sqrt(log_size(self.n))),
            "instances": math.ceil(4 * math.log(1.0 / self.delta)),
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if self.tau < 2:
            raise ValueError(f"tau must be at least 2, got {self.tau}")
        for name in ("k", "r", "instances", "magnitude_bound", "tail_memo_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.eps_test <= EPS_TEST_CAP:
            raise ValueError(f"eps_test must lie in (0, {EPS_TEST_CAP}], got {self.eps_test}")
        if self.column_cache < 0:
            raise ValueError("column_cache must be non-negative")

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, seed=seed)

    def describe(self) -> dict:
        """Effective configuration as plain values."""
        q = self.quadrature
        return {
            "n": self.n, "p": self.p, "delta": self.delta, "tau": self.tau, "k": self.k,
            "r": self.r, "eps_test": self.eps_test, "L_bits": self.L_bits,
            "instances": self.instances, "seed": self.seed, "tail_method": self.tail_method,
            "second_condition": self.second_condition, "magnitude_bound": self.magnitude_bound,
            "tail_memo_limit": self.tail_memo_limit, "column_cache": self.column_cache,
            "quadrature_tolerance": q.tolerance, "quadrature_initial_mesh": q.initial_mesh,
            "quadrature_max_halvings": q.max_halvings, "quadrature_growth": q.growth,
        }


@dataclass(frozen=True)
class InstanceDiagnostics:
    z1: float
    z2: float
    Z: float
    mu: float
    gap_margin: float  # z1 - z2 - 100 mu eps Z
    second_margin: float  # z2 - 50 mu eps Z
    passed: bool
    candidate: int  # coordinate of the largest estimate


@dataclass(frozen=True)
class SampleOutcome:
    """``result`` is a 0-based coordinate, or ``None`` for the failure symbol."""

    result: Optional[int]
    instance: Optional[int]
    diagnostics: tuple[InstanceDiagnostics, ...]

    @property
    def failed(self) -> bool:
        return self.result is None

    @property
    def reported(self) -> Optional[InstanceDiagnostics]:
        """Diagnostics of the deciding instance, or of the first one on failure."""
        if not self.diagnostics:
            return None
        return self.diagnostics[self.instance if self.instance is not None else 0]


def statistical_test(z1: float, z2: float, Z: float, eps_test: float, mu: float, second_condition: bool = True) -> bool:
    """True when the top two estimates are separated enough to trust the argmax."""
    if Z == 0.0 and z1 == 0.0:
        return False
    if z1 - z2 < 100.0 * mu * eps_test * Z:
        return False
    if second_condition and z2 < 50.0 * mu * eps_test * Z:
        return False
    return True


def draw_mu(tape: RandomTape) -> float:
    return 0.99 + 0.02 * derive_uniform(tape, [(Label.TEST, 0)])


class Sampler:
    """One run of the sampler over a turnstile stream.

    Create with :meth:`create`, feed :meth:`process_update`, then call
    :meth:`finalize`.  Updates to one sampler must be serialized.
    """

    def __init__(self, config: SamplerConfig, coordinate_keys: Optional[Sequence[int]] = None) -> None:
        self.config = config
        if coordinate_keys is not None:
            keys = [int(c) for c in coordinate_keys]
            if len(keys) != config.n or len(set(keys)) != config.n:
                raise ValueError("coordinate_keys must be n distinct integers")
            self._keys: Optional[list[int]] = keys
        else:
            self._keys = None
        self.tape = RandomTape(config.seed)
        self.instance_tapes = [self.tape.child(Label.INSTANCE, a) for a in range(config.instances)]
        column_size = config.r * config.k * (config.tau + 1)
        cache = min(config.column_cache, CACHE_FLOATS_PER_SKETCH // column_size)
        self.sketches = [SketchState(t, config.k, config.r, config.tau, cache) for t in self.instance_tapes]
        self._memo: OrderedDict[tuple[int, int], tuple[HeadStatistics, TailAggregate]] = OrderedDict()
        self.updates_processed = 0

    @classmethod
    def create(cls, config: SamplerConfig) -> "Sampler":
        return cls(config)

    def tape_index(self, i: int) -> int:
        """Index under which coordinate ``i`` reads the tape."""
        return i if self._keys is None else self._keys[i]

    @property
    def counter(self):
        return self.tape.counter

    def coordinate_state(self, instance: int, i: int) -> tuple[HeadStatistics, TailAggregate]:
        """Head and tail of coordinate ``i`` in ``instance``, sampled on first use.

        Both are functions of the tape alone, so an evicted entry is
        recomputed to the same value.
        """
        key = (instance, i)
        hit = self._memo.get(key)
        if hit is not None:
            self._memo.move_to_end(key)
            return hit
        cfg = self.config
        tape = self.instance_tapes[instance]
        i = self.tape_index(i)
        head = sample_head(tape, i, cfg.tau, cfg.p)
        if cfg.tail_method == "exact":
            law = TailLawParams(cfg.p, head.R)
            tail = sample_tail_sum(
                tape, law, cfg.L_bits, cfg.quadrature, key=[(Label.COORDINATE, i), (Label.TAIL, 0)]
            )
        else:
            table = tail_quantile_table(cfg.p, cfg.quadrature)
            tail = sample_tail_composed(tape, i, head, cfg.p, cfg.L_bits, cfg.quadrature, table)
        self._memo[key] = (head, tail)
        if len(self._memo) > cfg.tail_memo_limit:
            self._memo.popitem(last=False)
        return head, tail

    def process_update(self, i: int, delta: int) -> None:
        cfg = self.config
        if not 0 <= i < cfg.n:
            raise IndexError(f"coordinate {i} outside [0, {cfg.n})")
        if abs(delta) > cfg.magnitude_bound:
            raise ValueError(f"|delta| = {abs(delta)} exceeds the bound {cfg.magnitude_bound}")
        for a, sketch in enumerate(self.sketches):
            head, tail = self.coordinate_state(a, i)
            sketch_update(sketch, self.tape_index(i), int(delta), head, tail)
        self.updates_processed += 1

    def process_stream(self, updates: Iterable[tuple[int, int]]) -> None:
        for i, delta in updates:
            self.process_update(i, delta)

    def _finalize_instance(self, a: int) -> InstanceDiagnostics:
        cfg = self.config
        sketch = self.sketches[a]
        keys = range(cfg.n) if self._keys is None else self._keys
        magnitudes = np.abs(estimate_all(sketch, keys)).ravel()
        # stable sort on the negated values: ties go to the lower virtual index
        order = np.argsort(-magnitudes, kind="stable")
        z1 = float(magnitudes[order[0]])
        z2 = float(magnitudes[order[1]]) if magnitudes.size > 1 else 0.0
        Z = estimate_norm(sketch)
        mu = draw_mu(self.instance_tapes[a])
        passed = statistical_test(z1, z2, Z, cfg.eps_test, mu, cfg.second_condition)
        return InstanceDiagnostics(
            z1=z1,
            z2=z2,
            Z=Z,
            mu=mu,
            gap_margin=z1 - z2 - 100.0 * mu * cfg.eps_test * Z,
            second_margin=z2 - 50.0 * mu * cfg.eps_test * Z,
            passed=passed,
            candidate=int(order[0]) // cfg.tau,
        )

    def finalize(self) -> SampleOutcome:
        diagnostics = []
        for a in range(self.config.instances):
            diag = self._finalize_instance(a)
            diagnostics.append(diag)
            if diag.passed:
                return SampleOutcome(diag.candidate, a, tuple(diagnostics))
        return SampleOutcome(None, None, tuple(diagnostics))


def create(config: SamplerConfig) -> Sampler:
    return Sampler.create(config)


def run_sampler(
    config: SamplerConfig, updates: Iterable[tuple[int, int]], coordinate_keys: Optional[Sequence[int]] = None
) -> SampleOutcome:
    sampler = Sampler(config, coordinate_keys)
    sampler.process_stream(updates)
    return sampler.finalize()


def vector_updates(x: Iterable[int]) -> list[tuple[int, int]]:
    """One update per nonzero entry of ``x``."""
    return [(i, int(v)) for i, v in enumerate(x) if v != 0]
