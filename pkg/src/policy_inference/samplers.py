"""Posterior inference over policy parameters.

All samplers target the flattened linear-conditioning model

    theta ~ prior,   tau ~* trace prior,   1 ~ Bernoulli((P(theta, tau) - L) / (U - L))

where ``tau ~*`` marks the simulator's random choices as stochastic
choices: proposals to them are always accepted.  Theta proposals are prior
redraws, so prior densities cancel and acceptance depends only on the
reward ratio, optionally tempered by ``1 / temperature``.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conditioning import ConditioningError, ConditioningKind, linear_conditioning
from .theta import ThetaVector
from .trace import Simulator, Trace, resample_all, resample_site, run_with_trace


class BoundViolationError(ConditioningError):
    """The simulator returned a reward outside its declared bounds."""


class DegenerateWeightsError(ValueError):
    pass


class ProposalMode(enum.Enum):
    WHOLE_THETA = "whole"
    SINGLE_SITE = "single"


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator; split streams with ``SeedSequence.spawn``."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int
    temperature: float = 1.0
    seed: int = 0
    proposal_mode: ProposalMode = ProposalMode.SINGLE_SITE
    # None -> 10% of iterations
    burn_in: int | None = None

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")


@dataclass
class ChainState:
    theta: ThetaVector
    trace: Trace
    reward: float
    accept_count_theta: int = 0
    accept_count_tau: int = 0
    proposal_count_theta: int = 0
    proposal_count_tau: int = 0

    @property
    def theta_acceptance_rate(self) -> float:
        if self.proposal_count_theta == 0:
            return math.nan
        return self.accept_count_theta / self.proposal_count_theta

    @property
    def tau_acceptance_rate(self) -> float:
        if self.proposal_count_tau == 0:
            return math.nan
        return self.accept_count_tau / self.proposal_count_tau


@dataclass(frozen=True, slots=True)
class SampleRecord:
    iteration: int
    temperature: float
    theta: ThetaVector
    reward: float
    accepted: bool
    # "theta" or "tau": the move made in this iteration (the theta move for Algorithm-1 steps)
    move: str


@dataclass
class Chain:
    """Post-burn-in records of one chain plus its final state."""

    records: list
    state: ChainState
    temperature: float
    config: SamplerConfig | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def theta_frequencies(self, key=lambda theta: theta.values) -> dict:
        counts = Counter(key(r.theta) for r in self.records)
        n = len(self.records)
        return {k: c / n for k, c in counts.items()}

    def mean_reward(self) -> float:
        return float(np.mean([r.reward for r in self.records]))


@dataclass(frozen=True)
class WeightedSample:
    theta: ThetaVector
    weight: float
    reward: float = field(default=math.nan, compare=False)


def mh_accept_prob(r_new: float, r_old: float, lower: float, temperature: float = 1.0) -> float:
    """Tempered acceptance ``min(1, ((r_new - L) / (r_old - L)) ** (1 / T))``.

    A move off a zero-probability state (``r_old == lower``) is always
    accepted, including the 0/0 case where both states sit on the bound.
    """
    if r_new < lower or r_old < lower:
        raise BoundViolationError(f"reward below lower bound {lower}: {r_new}, {r_old}")
    if r_new >= r_old:
        return 1.0
    if r_new == lower:
        return 0.0
    log_ratio = math.log(r_new - lower) - math.log(r_old - lower)
    return math.exp(log_ratio / temperature)


def _checked(sim: Simulator, reward: float) -> float:
    if not sim.bounds.contains(reward):
        raise BoundViolationError(
            f"{type(sim).__name__} returned {reward} outside "
            f"[{sim.bounds.lower}, {sim.bounds.upper}]")
    return reward


def _require_linear(sim: Simulator):
    if sim.conditioning is not ConditioningKind.LINEAR:
        raise ValueError("stochastic MH is derived for linear conditioning only")


def initial_state(sim: Simulator, theta0: ThetaVector, rng: np.random.Generator) -> ChainState:
    reward, trace = run_with_trace(sim, theta0, Trace.empty(), rng)
    return ChainState(theta0, trace, _checked(sim, reward))


def stochastic_mh(sim: Simulator, theta0: ThetaVector, config: SamplerConfig,
                  rng: np.random.Generator | None = None,
                  state: ChainState | None = None) -> Chain:
    """Whole-theta stochastic Metropolis-Hastings.

    Every iteration refreshes the whole trace and re-runs the simulator at
    the current theta (always accepted), then proposes a fresh theta from
    the prior and compares the two rewards under the same trace.
    """
    _require_linear(sim)
    if config.proposal_mode is not ProposalMode.WHOLE_THETA:
        raise ValueError("stochastic_mh needs proposal_mode=WHOLE_THETA")
    if rng is None:
        rng = make_rng(config.seed)
    if state is None:
        state = initial_state(sim, theta0, rng)
    lower = sim.bounds.lower
    temperature = config.temperature
    theta, trace = state.theta, state.trace
    records = []
    for it in range(config.iterations):
        # tau move: always accepted
        r_old, trace = run_with_trace(sim, theta, resample_all(trace, rng), rng)
        _checked(sim, r_old)
        state.proposal_count_tau += 1
        state.accept_count_tau += 1

        theta_new = theta.redraw_all(rng)
        r_new, trace_new = run_with_trace(sim, theta_new, trace, rng)
        _checked(sim, r_new)
        state.proposal_count_theta += 1
        a = mh_accept_prob(r_new, r_old, lower, temperature)
        accepted = rng.random() < a
        if accepted:
            theta, trace, reward = theta_new, trace_new, r_new
            state.accept_count_theta += 1
        else:
            reward = r_old
        if it >= config.burn_in:
            records.append(SampleRecord(it, temperature, theta, reward, accepted, "theta"))
    state.theta, state.trace, state.reward = theta, trace, reward
    return Chain(records, state, temperature, config)


def stochastic_lmh(sim: Simulator, theta0: ThetaVector, config: SamplerConfig,
                   rng: np.random.Generator | None = None,
                   state: ChainState | None = None) -> Chain:
    """Single-site stochastic lightweight Metropolis-Hastings.

    Each iteration picks one site uniformly among the theta components and
    the addresses of the current trace.  Trace sites are redrawn from
    their prior and always accepted; theta components are redrawn from
    their prior and accepted on the tempered reward ratio.
    """
    _require_linear(sim)
    if config.proposal_mode is not ProposalMode.SINGLE_SITE:
        raise ValueError("stochastic_lmh needs proposal_mode=SINGLE_SITE")
    if rng is None:
        rng = make_rng(config.seed)
    if state is None:
        state = initial_state(sim, theta0, rng)
    lower = sim.bounds.lower
    temperature = config.temperature
    theta, trace, reward = state.theta, state.trace, state.reward
    n_theta = len(theta)
    records = []
    for it in range(config.iterations):
        n_sites = n_theta + len(trace)
        if n_sites == 0:
            accepted, move = True, "tau"
        else:
            k = int(rng.random() * n_sites)
            if k >= n_theta:
                move = "tau"
                site = trace.draw_log[k - n_theta]
                reward, trace = run_with_trace(sim, theta, resample_site(trace, site, rng), rng)
                _checked(sim, reward)
                state.proposal_count_tau += 1
                state.accept_count_tau += 1
                accepted = True
            else:
                move = "theta"
                theta_new = theta.redraw(k, rng)
                r_new, trace_new = run_with_trace(sim, theta_new, trace, rng)
                _checked(sim, r_new)
                state.proposal_count_theta += 1
                a = mh_accept_prob(r_new, reward, lower, temperature)
                accepted = rng.random() < a
                if accepted:
                    theta, trace, reward = theta_new, trace_new, r_new
                    state.accept_count_theta += 1
        if it >= config.burn_in:
            records.append(SampleRecord(it, temperature, theta, reward, accepted, move))
    state.theta, state.trace, state.reward = theta, trace, reward
    return Chain(records, state, temperature, config)


def run_sampler(sim: Simulator, theta0: ThetaVector, config: SamplerConfig,
                rng: np.random.Generator | None = None,
                state: ChainState | None = None) -> Chain:
    if config.proposal_mode is ProposalMode.WHOLE_THETA:
        return stochastic_mh(sim, theta0, config, rng, state)
    return stochastic_lmh(sim, theta0, config, rng, state)


def importance_sampling(sim: Simulator, n: int, rng: np.random.Generator,
                        theta0: ThetaVector | None = None) -> list[WeightedSample]:
    """Independent (theta, trace) pairs weighted by the linear conditioning probability."""
    _require_linear(sim)
    if n <= 0:
        raise ValueError("n must be positive")
    if theta0 is None:
        theta0 = sim.prior(rng)
    samples = []
    for _ in range(n):
        theta = theta0.redraw_all(rng)
        reward, _ = run_with_trace(sim, theta, Trace.empty(), rng)
        _checked(sim, reward)
        samples.append(WeightedSample(theta, linear_conditioning(reward, sim.bounds), reward))
    if not any(s.weight > 0 for s in samples):
        raise DegenerateWeightsError("all importance weights are zero")
    return samples


def weighted_frequencies(samples: Sequence[WeightedSample],
                         key=lambda theta: theta.values) -> dict:
    """Self-normalized posterior mass per theta key."""
    total = math.fsum(s.weight for s in samples)
    if total <= 0:
        raise DegenerateWeightsError("all importance weights are zero")
    out: dict = {}
    for s in samples:
        k = key(s.theta)
        out[k] = out.get(k, 0.0) + s.weight
    return {k: w / total for k, w in out.items()}


def resample_weighted(samples: Sequence[WeightedSample], rng: np.random.Generator,
                      temperature: float = 1.0) -> ThetaVector:
    """Draw one theta with probability proportional to ``weight ** (1 / temperature)``."""
    w = np.array([s.weight for s in samples], dtype=float)
    if not (w > 0).any():
        raise DegenerateWeightsError("all importance weights are zero")
    logw = np.full_like(w, -np.inf)
    logw[w > 0] = np.log(w[w > 0]) / temperature
    p = np.exp(logw - logw.max())
    p /= p.sum()
    return samples[int(rng.choice(len(samples), p=p))].theta


def anneal_schedule_run(sim: Simulator, theta0: ThetaVector, temperatures: Sequence[float],
                        iterations_per_temp: int, rng: np.random.Generator,
                        burn_in: int | None = None,
                        proposal_mode: ProposalMode = ProposalMode.SINGLE_SITE,
                        warm_start: bool = True) -> tuple[ThetaVector, list[Chain]]:
    """Simulated annealing over a descending temperature list.

    Only theta moves are tempered.  With ``warm_start`` each temperature
    continues from the previous chain's final theta and trace; otherwise
    every temperature restarts from ``theta0``.
    """
    temperatures = [float(t) for t in temperatures]
    if not temperatures:
        raise ValueError("need at least one temperature")
    if any(t <= 0 for t in temperatures):
        raise ValueError("temperatures must be positive")
    if any(b >= a for a, b in zip(temperatures, temperatures[1:])):
        raise ValueError("temperatures must be strictly descending")
    chains = []
    state = None
    for t in temperatures:
        config = SamplerConfig(iterations_per_temp, temperature=t,
                               proposal_mode=proposal_mode, burn_in=burn_in)
        if state is not None and warm_start:
            # fresh counters, carried (theta, trace, reward)
            state = ChainState(state.theta, state.trace, state.reward)
        else:
            state = None
        chain = run_sampler(sim, theta0, config, rng, state)
        chains.append(chain)
        state = chain.state
    return mode_estimate(chains[-1]), chains


def mode_estimate(chain) -> ThetaVector:
    """Theta of the final record of a chain (the lowest-temperature one when
    given the per-temperature list from :func:`anneal_schedule_run`)."""
    if isinstance(chain, (list, tuple)) and chain and isinstance(chain[0], Chain):
        chain = min(chain, key=lambda c: c.temperature)
    records = chain.records if isinstance(chain, Chain) else chain
    if len(records) == 0:
        raise ValueError("empty chain has no mode estimate")
    return records[-1].theta
