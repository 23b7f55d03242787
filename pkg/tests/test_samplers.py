import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from policy_inference import make_rng
from policy_inference.conditioning import ConditioningKind, RewardBounds
from policy_inference.distributions import Bernoulli, Categorical, point_mass
from policy_inference.envs import ctp
from policy_inference.oracle import (
    DiscreteModel,
    TableSimulator,
    exact_posterior,
    sampler_stationary,
    total_variation,
)
from policy_inference.samplers import (
    BoundViolationError,
    Chain,
    DegenerateWeightsError,
    ProposalMode,
    SamplerConfig,
    anneal_schedule_run,
    importance_sampling,
    mh_accept_prob,
    mode_estimate,
    resample_weighted,
    run_sampler,
    stochastic_lmh,
    stochastic_mh,
    weighted_frequencies,
)
from policy_inference.theta import ThetaVector
from policy_inference.trace import Simulator, addr

WHOLE, SINGLE = ProposalMode.WHOLE_THETA, ProposalMode.SINGLE_SITE


def deterministic_toy():
    """theta in {0, 1} uniform, r(theta) = theta, bounds [0, 1]."""
    return DiscreteModel.from_function({0: 0.5, 1: 0.5}, {0: 1.0},
                                       lambda th, tau: float(th), RewardBounds(0.0, 1.0))


def two_by_two():
    # rewards depend on both theta and tau
    table = {(0, 0): 0.0, (0, 1): 2.0, (1, 0): 1.0, (1, 1): 1.0}
    return DiscreteModel.from_function({0: 0.5, 1: 0.5}, {0: 0.5, 1: 0.5},
                                       lambda th, tau: table[(th, tau)], RewardBounds(0.0, 4.0))


def factored_model():
    """Two theta components and two trace sites, so single-site moves are meaningful."""
    tf = [[(0, 0.5), (1, 0.5)], [(0, 0.3), (1, 0.7)]]
    kf = [[(0, 0.6), (1, 0.4)], [(0, 0.5), (1, 0.5)]]
    thetas = [((a, b), pa * pb) for a, pa in tf[0] for b, pb in tf[1]]
    taus = [((c, d), pc * pd) for c, pc in kf[0] for d, pd in kf[1]]
    table = {(th, tau): 1.0 + th[0] + 2 * th[1] * tau[0] + 0.5 * tau[1]
             for th, _ in thetas for tau, _ in taus}
    return DiscreteModel(thetas, taus, table, RewardBounds(0.0, 5.0), tf, kf)


def chain_marginal(chain: Chain, sim: TableSimulator) -> dict:
    return chain.theta_frequencies(sim.theta_key)


def config(n, mode=SINGLE, **kw):
    return SamplerConfig(n, proposal_mode=mode, burn_in=kw.pop("burn_in", 0), **kw)


# -- acceptance probability -------------------------------------------------

def test_accept_prob_examples():
    assert mh_accept_prob(3.0, 3.0, -1.0, 1.0) == 1.0
    assert mh_accept_prob(1.0, 2.0, 0.0, 1.0) == 0.5
    assert mh_accept_prob(2.5 + 1, 2.5 + 4, 2.5, 0.5) == pytest.approx(0.0625, abs=1e-15)


def test_accept_prob_from_zero_probability_state():
    assert mh_accept_prob(0.5, 0.0, 0.0) == 1.0
    assert mh_accept_prob(0.0, 0.0, 0.0) == 1.0
    assert mh_accept_prob(0.0, 0.5, 0.0) == 0.0


def test_accept_prob_bound_violation():
    with pytest.raises(BoundViolationError):
        mh_accept_prob(-0.1, 1.0, 0.0)
    with pytest.raises(BoundViolationError):
        mh_accept_prob(1.0, -0.1, 0.0)


@given(st.floats(0, 100), st.floats(1e-9, 100), st.floats(1e-3, 1e3))
def test_accept_prob_is_tempered_ratio(r_new, r_old, t):
    a = mh_accept_prob(r_new, r_old, 0.0, t)
    assert 0.0 <= a <= 1.0
    if r_new >= r_old:
        assert a == 1.0
    elif r_new == 0.0:
        assert a == 0.0
    else:
        expected = math.exp((math.log(r_new) - math.log(r_old)) / t)
        assert a == pytest.approx(expected, rel=1e-9, abs=1e-300)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.1, 5), st.floats(0.1, 5))
def test_accept_prob_monotone_in_temperature(a, b, t1, t2):
    lo_t, hi_t = sorted((t1, t2))
    assert mh_accept_prob(a, b, 0.0, hi_t) >= mh_accept_prob(a, b, 0.0, lo_t) - 1e-15


# -- configuration ----------------------------------------------------------

def test_config_defaults_and_validation():
    c = SamplerConfig(1000)
    assert c.burn_in == 100 and c.proposal_mode is SINGLE and c.temperature == 1.0
    with pytest.raises(ValueError):
        SamplerConfig(0)
    with pytest.raises(ValueError):
        SamplerConfig(10, temperature=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(10, burn_in=10)


def test_wrong_proposal_mode_rejected():
    sim = TableSimulator(deterministic_toy())
    theta = sim.prior(make_rng(0))
    with pytest.raises(ValueError):
        stochastic_mh(sim, theta, config(10, SINGLE))
    with pytest.raises(ValueError):
        stochastic_lmh(sim, theta, config(10, WHOLE))


def test_exponential_simulator_rejected():
    class Expo(TableSimulator):
        conditioning = ConditioningKind.EXPONENTIAL

    sim = Expo(deterministic_toy())
    with pytest.raises(ValueError):
        stochastic_lmh(sim, sim.prior(make_rng(0)), config(10))
    with pytest.raises(ValueError):
        importance_sampling(sim, 10, make_rng(0))


def test_reward_below_bound_aborts():
    class Liar(Simulator):
        bounds = RewardBounds(0.0, 1.0)

        def run(self, theta, tracer):
            return -0.5 if tracer.sample(addr("x", 0), Bernoulli(0.5)) else 0.5

    theta = ThetaVector(["a"], [0], [point_mass(0)])
    with pytest.raises(BoundViolationError):
        stochastic_mh(Liar(), theta, config(200, WHOLE), make_rng(0))


# -- structural properties --------------------------------------------------

@pytest.mark.parametrize("mode", [WHOLE, SINGLE])
def test_point_mass_prior_gives_constant_chain(mode):
    sim = TableSimulator(two_by_two())
    theta = ThetaVector(["theta"], [1], [point_mass(1)])
    chain = run_sampler(sim, theta, config(500, mode), make_rng(1))
    assert {r.theta for r in chain} == {theta}
    assert chain.state.theta_acceptance_rate == 1.0


@pytest.mark.parametrize("mode", [WHOLE, SINGLE])
def test_tau_moves_always_accepted(mode):
    sim = TableSimulator(factored_model())
    chain = run_sampler(sim, sim.prior(make_rng(0)), config(2000, mode), make_rng(2))
    s = chain.state
    assert s.proposal_count_tau > 0
    assert s.accept_count_tau == s.proposal_count_tau
    assert s.tau_acceptance_rate == 1.0
    assert all(r.accepted for r in chain if r.move == "tau")


def test_zero_theta_components_only_tau_moves():
    class Coins(Simulator):
        bounds = RewardBounds(0.0, 2.0)

        def run(self, theta, tracer):
            return float(tracer.sample(addr("c", 0), Bernoulli(0.5))
                         + tracer.sample(addr("c", 1), Bernoulli(0.5)))

    chain = stochastic_lmh(Coins(), ThetaVector([], [], []), config(20_000), make_rng(3))
    assert all(r.move == "tau" and r.accepted for r in chain)
    assert chain.state.proposal_count_theta == 0
    rewards = np.array([r.reward for r in chain])
    for value, p in ((0.0, 0.25), (1.0, 0.5), (2.0, 0.25)):
        assert abs(np.mean(rewards == value) - p) < 0.02


def test_single_site_changes_at_most_one_component():
    sim = TableSimulator(factored_model())
    chain = stochastic_lmh(sim, sim.prior(make_rng(0)), config(3000), make_rng(4))
    prev = chain.records[0].theta.values
    for rec in chain.records[1:]:
        cur = rec.theta.values
        assert sum(a != b for a, b in zip(prev, cur)) <= 1
        if rec.move == "tau":
            assert cur == prev
        prev = cur


def test_counters_and_records():
    sim = TableSimulator(factored_model())
    chain = stochastic_lmh(sim, sim.prior(make_rng(0)), SamplerConfig(1000, seed=5), None)
    s = chain.state
    assert len(chain) == 900
    assert chain.records[0].iteration == 100
    assert s.proposal_count_theta + s.proposal_count_tau == 1000
    assert 0 <= s.accept_count_theta <= s.proposal_count_theta


@pytest.mark.parametrize("mode", [WHOLE, SINGLE])
def test_seed_determinism(mode):
    sim = ctp.CtpSimulator(ctp.triangle_instance())
    theta0 = sim.prior(make_rng(0))
    a = run_sampler(sim, theta0, SamplerConfig(800, seed=17, proposal_mode=mode))
    b = run_sampler(sim, theta0, SamplerConfig(800, seed=17, proposal_mode=mode))
    assert [(r.theta, r.reward, r.accepted, r.move) for r in a] == \
           [(r.theta, r.reward, r.accepted, r.move) for r in b]


@dataclass(frozen=True)
class DoubledCategorical(Categorical):
    """Same sampler, every density doubled."""

    def log_prob(self, x):
        return super().log_prob(x) + math.log(2.0)


@pytest.mark.parametrize("mode", [WHOLE, SINGLE])
def test_acceptance_is_prior_free(mode):
    model = factored_model()
    sim = TableSimulator(model)
    values = (0, 1)
    plain = [Categorical(values, (0.5, 0.5)), Categorical(values, (0.3, 0.7))]
    doubled = [DoubledCategorical(values, (0.5, 0.5)), DoubledCategorical(values, (0.3, 0.7))]
    assert doubled[1].prob(1) == pytest.approx(1.4)
    runs = []
    for priors in (plain, doubled):
        theta0 = ThetaVector(["theta0", "theta1"], [0, 0], priors)
        chain = run_sampler(sim, theta0, config(3000, mode), make_rng(9))
        runs.append([(r.theta.values, r.accepted, r.reward) for r in chain])
    assert runs[0] == runs[1]


# -- stationary laws --------------------------------------------------------

@pytest.mark.parametrize("mode", ["mh", "lmh"])
def test_deterministic_toy_matches_oracle(mode):
    model = deterministic_toy()
    sim = TableSimulator(model)
    cfg = config(100_000, WHOLE if mode == "mh" else SINGLE, burn_in=1000)
    chain = run_sampler(sim, sim.prior(make_rng(0)), cfg, make_rng(10))
    freq = chain_marginal(chain, sim)
    exact = exact_posterior(model)
    assert exact == {0: 0.0, 1: 1.0}
    assert abs(freq.get(1, 0.0) - exact[1]) <= 0.02


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["mh", "lmh"])
@pytest.mark.parametrize("model_fn", [two_by_two, factored_model])
def test_chain_matches_kernel_stationary_law(mode, model_fn):
    """The implemented chain converges to the exact fixed point of its kernel."""
    model = model_fn()
    sim = TableSimulator(model)
    cfg = config(60_000, WHOLE if mode == "mh" else SINGLE, burn_in=2000)
    chain = run_sampler(sim, sim.prior(make_rng(0)), cfg, make_rng(11))
    target = sampler_stationary(model, mode)
    assert total_variation(chain_marginal(chain, sim), target) <= 0.02


def test_stationary_law_bias_on_two_by_two():
    # E[r | theta] is 1 for both thetas, so the flattened posterior is uniform.
    # The whole-theta kernel moves 0 -> 1 with probability
    # 1/2 * (1/2 * 1 + 1/2 * 1/2) = 3/8 and 1 -> 0 with 1/2 * (1/2 * 0 + 1/2 * 1) = 1/4,
    # so its fixed point puts 0.25 / 0.625 = 0.4 on theta = 0.
    model = two_by_two()
    assert exact_posterior(model) == pytest.approx({0: 0.5, 1: 0.5}, abs=1e-15)
    assert sampler_stationary(model, "mh") == pytest.approx({0: 0.4, 1: 0.6}, abs=1e-12)


def test_stationary_law_exact_when_trace_irrelevant():
    model = deterministic_toy()
    for mode in ("mh", "lmh"):
        assert total_variation(sampler_stationary(model, mode), exact_posterior(model)) < 1e-12


@pytest.mark.slow
def test_high_temperature_limit_recovers_prior():
    tf = [[(0, 0.5), (1, 0.3), (2, 0.2)]]
    kf = [[(0, 0.5), (1, 0.5)]]
    base = {0: 1.0, 1: 2.0, 2: 5.0}
    thetas = [((k,), m) for k, m in tf[0]]
    taus = [((k,), m) for k, m in kf[0]]
    table = {(th, tau): base[th[0]] + 2.0 * tau[0] for th, _ in thetas for tau, _ in taus}
    model = DiscreteModel(thetas, taus, table, RewardBounds(0.0, 10.0), tf, kf)
    sim = TableSimulator(model)
    chain = stochastic_lmh(sim, sim.prior(make_rng(0)),
                           config(100_000, temperature=1e6, burn_in=1000), make_rng(12))
    prior = {th: m for th, m in thetas}
    assert total_variation(chain_marginal(chain, sim), prior) <= 0.02


# -- importance sampling ----------------------------------------------------

def test_is_constant_upper_reward_gives_prior():
    model = DiscreteModel.from_function({0: 0.25, 1: 0.75}, {0: 1.0}, lambda th, tau: 1.0,
                                        RewardBounds(0.0, 1.0))
    sim = TableSimulator(model)
    samples = importance_sampling(sim, 4000, make_rng(0))
    assert all(s.weight == 1.0 for s in samples)
    freq = weighted_frequencies(samples, sim.theta_key)
    assert abs(freq[1] - 0.75) < 0.03


def test_is_all_weights_zero_is_degenerate():
    model = DiscreteModel.from_function({0: 0.5, 1: 0.5}, {0: 1.0}, lambda th, tau: 0.0,
                                        RewardBounds(0.0, 1.0))
    with pytest.raises(DegenerateWeightsError):
        importance_sampling(TableSimulator(model), 100, make_rng(0))


def test_is_toy_estimate():
    model = two_by_two()
    sim = TableSimulator(model)
    samples = importance_sampling(sim, 100_000, make_rng(13))
    freq = weighted_frequencies(samples, sim.theta_key)
    assert abs(freq[1] - exact_posterior(model)[1]) <= 0.02


def test_resample_weighted_cold_picks_heaviest():
    model = deterministic_toy()
    sim = TableSimulator(model)
    samples = importance_sampling(sim, 200, make_rng(0))
    picks = {sim.theta_key(resample_weighted(samples, make_rng(i), temperature=1e-3))
             for i in range(20)}
    assert picks == {1}


# -- annealing and mode readout ---------------------------------------------

def test_anneal_validates_schedule():
    sim = TableSimulator(deterministic_toy())
    theta = sim.prior(make_rng(0))
    for temps in ([], [1.0, 1.0], [0.1, 1.0], [1.0, -1.0]):
        with pytest.raises(ValueError):
            anneal_schedule_run(sim, theta, temps, 10, make_rng(0))


def test_anneal_single_temperature_is_plain_lmh():
    sim = ctp.CtpSimulator(ctp.triangle_instance())
    theta0 = sim.prior(make_rng(0))
    mode, chains = anneal_schedule_run(sim, theta0, [1.0], 500, make_rng(21), burn_in=50)
    direct = stochastic_lmh(sim, theta0, SamplerConfig(500, burn_in=50), make_rng(21))
    assert [r.theta for r in chains[0]] == [r.theta for r in direct]
    assert mode == direct.records[-1].theta


def test_anneal_warm_start_carries_state():
    sim = TableSimulator(factored_model())
    theta0 = sim.prior(make_rng(0))
    _, chains = anneal_schedule_run(sim, theta0, [10.0, 1.0], 300, make_rng(5), burn_in=0)
    assert chains[1].state.proposal_count_tau + chains[1].state.proposal_count_theta == 300
    assert [c.temperature for c in chains] == [10.0, 1.0]


def test_ctp_tempering_sanity():
    sim = ctp.CtpSimulator(ctp.triangle_instance())
    _, chains = anneal_schedule_run(sim, sim.prior(make_rng(0)), [100.0, 0.01], 5000,
                                    make_rng(6))
    assert chains[0].state.theta_acceptance_rate > chains[1].state.theta_acceptance_rate


def test_mode_estimate_forms():
    sim = TableSimulator(factored_model())
    chain = stochastic_lmh(sim, sim.prior(make_rng(0)), config(50), make_rng(0))
    assert mode_estimate(chain) == chain.records[-1].theta
    assert mode_estimate(chain.records[:1]) == chain.records[0].theta
    with pytest.raises(ValueError):
        mode_estimate([])
    hot = Chain(chain.records[:5], chain.state, 10.0, chain.config)
    assert mode_estimate([hot, chain]) == chain.records[-1].theta


def test_mode_estimate_constant_chain():
    sim = TableSimulator(two_by_two())
    theta = ThetaVector(["theta"], [0], [point_mass(0)])
    chain = stochastic_mh(sim, theta, config(100, WHOLE), make_rng(0))
    assert mode_estimate(chain) == theta


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_chain_rewards_respect_bounds(seed):
    sim = ctp.CtpSimulator(ctp.triangle_instance())
    chain = stochastic_lmh(sim, sim.prior(make_rng(seed)), config(100), make_rng(seed))
    assert all(sim.bounds.contains(r.reward) for r in chain)
