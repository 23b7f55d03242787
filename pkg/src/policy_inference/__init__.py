"""Bayesian policy search with stochastic (lightweight) Metropolis-Hastings."""

from .conditioning import (
    ConditioningError,
    ConditioningKind,
    RewardBounds,
    exp_conditioning,
    linear_conditioning,
    softplus_reward,
)
from .samplers import (
    Chain,
    ChainState,
    ProposalMode,
    SampleRecord,
    SamplerConfig,
    anneal_schedule_run,
    importance_sampling,
    make_rng,
    mh_accept_prob,
    mode_estimate,
    stochastic_lmh,
    stochastic_mh,
)
from .theta import ThetaVector
from .trace import Simulator, Trace, addr, resample_all, resample_site, run_with_trace

__version__ = "0.1.0"

__all__ = [
    "Chain", "ChainState", "ConditioningError", "ConditioningKind", "ProposalMode",
    "RewardBounds", "SampleRecord", "SamplerConfig", "Simulator", "ThetaVector", "Trace",
    "addr", "anneal_schedule_run", "exp_conditioning", "importance_sampling",
    "linear_conditioning", "make_rng", "mh_accept_prob", "mode_estimate", "resample_all",
    "resample_site", "run_with_trace", "softplus_reward", "stochastic_lmh", "stochastic_mh",
]
