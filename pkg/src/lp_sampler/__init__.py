"""L_p sampling over turnstile streams with exact output probabilities."""

from .cdf import QuadratureConfig, evaluate_cdf
from .limiting_cf import TailLawParams, cf, log_cf
from .pipeline import SampleOutcome, Sampler, SamplerConfig, create, run_sampler
from .randomness import RandomTape
from .samplers import HeadStatistics, TailAggregate, sample_head, sample_tail_sum

__all__ = [
    "HeadStatistics",
    "QuadratureConfig",
    "RandomTape",
    "SampleOutcome",
    "Sampler",
    "SamplerConfig",
    "TailAggregate",
    "TailLawParams",
    "cf",
    "create",
    "evaluate_cdf",
    "log_cf",
    "run_sampler",
    "sample_head",
    "sample_tail_sum",
]
