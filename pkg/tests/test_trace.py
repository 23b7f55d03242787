import itertools
import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from policy_inference import make_rng
from policy_inference.conditioning import RewardBounds
from policy_inference.distributions import Bernoulli, Beta, Categorical, Uniform, point_mass
from policy_inference.theta import ThetaVector
from policy_inference.trace import (
    DuplicateAddressError,
    Simulator,
    Trace,
    TraceError,
    TraceIncompatibilityError,
    Tracer,
    addr,
    format_address,
    parse_address,
    resample_all,
    resample_site,
    run_with_trace,
)

COIN = Bernoulli(0.5)
# hand-written table for the four branches of the two-coin toy
TWO_COIN_REWARD = {(True, True): 3.0, (True, False): 2.0, (False, True): 1.0, (False, False): 0.0}


class TwoCoins(Simulator):
    bounds = RewardBounds(0.0, 3.0)

    def prior(self, rng):
        return ThetaVector([], [], [])

    def run(self, theta, tracer):
        a = tracer.sample(addr("coin", 0), COIN)
        b = tracer.sample(addr("coin", 1), COIN)
        return TWO_COIN_REWARD[(a, b)]


class Branching(Simulator):
    """Control flow depends on the first draw; the branches use different sites."""

    bounds = RewardBounds(0.0, 10.0)

    def prior(self, rng):
        return ThetaVector(["k"], [2], [Categorical((1, 2, 3))])

    def run(self, theta, tracer):
        if tracer.sample(addr("branch", 0), COIN):
            return sum(tracer.sample(addr("left", i), Uniform(0.0, 1.0)) for i in range(theta["k"]))
        return 5.0 * tracer.sample(addr("right", 0), Beta(2.0, 2.0))


def _heads_heads():
    return Trace.from_choices([(addr("coin", 0), True, COIN), (addr("coin", 1), True, COIN)])


def test_address_helpers_round_trip():
    a = addr("rock", 1, "sense", 0)
    assert a == (("rock", 1), ("sense", 0))
    assert format_address(a) == "rock:1/sense:0"
    assert parse_address("rock:1/sense:0") == a
    assert addr("a", 0) < addr("a", 1) < addr("b", 0)


@pytest.mark.parametrize("parts", [(), ("a",), ("", 0), ("a", -1), ("a", 1.5), (3, 0)])
def test_bad_addresses(parts):
    with pytest.raises(ValueError):
        addr(*parts)


def test_two_coin_fixed_trace_gives_heads_heads_value():
    reward, trace = run_with_trace(TwoCoins(), None, _heads_heads(), make_rng(0))
    assert reward == TWO_COIN_REWARD[(True, True)]
    assert trace == _heads_heads()


def test_replay_is_deterministic(rng):
    sim = Branching()
    theta = sim.prior(rng)
    r1, t1 = run_with_trace(sim, theta, Trace.empty(), rng)
    r2, t2 = run_with_trace(sim, theta, t1, make_rng(999))
    r3, t3 = run_with_trace(sim, theta, t1, make_rng(1000))
    assert r1 == r2 == r3
    assert t1 == t2 == t3


def test_fresh_run_populates_every_visited_site(rng):
    reward, trace = run_with_trace(TwoCoins(), None, resample_all(_heads_heads(), rng), rng)
    assert list(trace) == [addr("coin", 0), addr("coin", 1)]
    assert reward == TWO_COIN_REWARD[trace.values()]


def test_control_flow_change_drops_stale_and_draws_new(rng):
    sim = Branching()
    theta = sim.prior(rng)
    left = Trace.from_choices([(addr("branch", 0), True, COIN),
                               (addr("left", 0), 0.25, Uniform(0.0, 1.0)),
                               (addr("left", 1), 0.5, Uniform(0.0, 1.0))])
    # flip the branch: the left sites are not visited and must be dropped
    right_start = Trace.from_choices([(addr("branch", 0), False, COIN),
                                      (addr("left", 0), 0.25, Uniform(0.0, 1.0))])
    _, t = run_with_trace(sim, theta, right_start, rng)
    assert list(t) == [addr("branch", 0), addr("right", 0)]
    # more iterations of the loop: old sites reused, the new one drawn fresh
    r, t = run_with_trace(sim, theta.replace(0, 3), left, rng)
    assert t.value(addr("left", 0)) == 0.25 and t.value(addr("left", 1)) == 0.5
    assert addr("left", 2) in t
    assert r == pytest.approx(0.75 + t.value(addr("left", 2)))


def test_prior_mismatch_is_incompatibility_error(rng):
    stale = Trace.from_choices([(addr("coin", 0), True, Bernoulli(0.3)),
                                (addr("coin", 1), True, COIN)])
    with pytest.raises(TraceIncompatibilityError):
        run_with_trace(TwoCoins(), None, stale, rng)


def test_duplicate_site_in_one_run_is_an_error(rng):
    class Twice(Simulator):
        bounds = RewardBounds(0.0, 1.0)

        def run(self, theta, tracer):
            tracer.sample(addr("x", 0), COIN)
            tracer.sample(addr("x", 0), COIN)
            return 0.0

    with pytest.raises(DuplicateAddressError):
        run_with_trace(Twice(), None, Trace.empty(), rng)


def test_from_choices_checks_support():
    with pytest.raises(ValueError):
        Trace.from_choices([(addr("u", 0), 1.5, Uniform(0.0, 1.0))])
    with pytest.raises(DuplicateAddressError):
        Trace.from_choices([(addr("u", 0), 0.5, Uniform()), (addr("u", 0), 0.5, Uniform())])


def test_resample_all_frequencies():
    sim, rng = TwoCoins(), make_rng(7)
    trace = _heads_heads()
    counts = Counter()
    n = 10_000
    for _ in range(n):
        _, trace = run_with_trace(sim, None, resample_all(trace, rng), rng)
        counts[trace.values()] += 1
    assert set(counts) == set(TWO_COIN_REWARD)
    for outcome in TWO_COIN_REWARD:
        assert abs(counts[outcome] / n - 0.25) <= 0.02


def test_resample_all_is_seed_deterministic():
    sim = TwoCoins()
    runs = []
    for _ in range(2):
        rng = make_rng(42)
        runs.append([run_with_trace(sim, None, resample_all(Trace.empty(), rng), rng)[1]
                     for _ in range(20)])
    assert runs[0] == runs[1]


def test_resample_site_point_mass_leaves_trace_unchanged(rng):
    t = Trace.from_choices([(addr("c", 0), "x", point_mass("x")), (addr("u", 0), 0.3, Uniform())])
    assert resample_site(t, addr("c", 0), rng) == t


def test_resample_site_only_touches_that_site(rng):
    t = Trace.from_choices([(addr("u", 0), 0.3, Uniform()), (addr("u", 1), 0.7, Uniform())])
    for _ in range(50):
        t2 = resample_site(t, addr("u", 0), rng)
        assert t2.value(addr("u", 1)) == 0.7
        assert t2.draw_log == t.draw_log


def test_resample_site_flip_frequency():
    rng = make_rng(3)
    t = Trace.from_choices([(addr("coin", 0), True, COIN)])
    flips = 0
    n = 10_000
    for _ in range(n):
        t2 = resample_site(t, addr("coin", 0), rng)
        flips += t2.value(addr("coin", 0)) != t.value(addr("coin", 0))
        t = t2
    assert abs(flips / n - 0.5) <= 0.02


def test_resample_site_absent_address(rng):
    with pytest.raises(TraceError):
        resample_site(_heads_heads(), addr("coin", 2), rng)


def test_trace_prior_consistency_by_enumeration():
    sim = TwoCoins()
    masses = {}
    for a, b in itertools.product([True, False], repeat=2):
        t = Trace.from_choices([(addr("coin", 0), a, COIN), (addr("coin", 1), b, COIN)])
        _, replayed = run_with_trace(sim, None, t, make_rng(0))
        masses[(a, b)] = replayed.prob()
    assert math.fsum(masses.values()) == pytest.approx(1.0, abs=1e-15)
    assert all(m == 0.25 for m in masses.values())


def test_trace_prob_is_product_of_entry_masses():
    p, q = Bernoulli(0.2), Categorical(("a", "b", "c"), (0.5, 0.3, 0.2))
    t = Trace.from_choices([(addr("p", 0), True, p), (addr("q", 0), "b", q)])
    assert t.prob() == pytest.approx(0.2 * 0.3, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(0, 5), max_size=20))
def test_support_invariant_under_operations(seed, ops):
    rng = make_rng(seed)
    sim = Branching()
    theta = sim.prior(rng)
    _, t = run_with_trace(sim, theta, Trace.empty(), rng)
    for op in ops:
        if op == 0:
            t = resample_all(t, rng)
        elif len(t):
            t = resample_site(t, t.draw_log[op % len(t)], rng)
        theta = theta.replace(0, 1 + op % 3)
        _, t = run_with_trace(sim, theta, t, rng)
        assert len(set(t.draw_log)) == len(t) == len(t.entries)
        for a in t:
            assert t.prior(a).in_support(t.value(a))


def test_trace_rows_use_string_addresses():
    assert _heads_heads().to_rows() == [("coin:0", True), ("coin:1", True)]


def test_tracer_builds_trace_in_execution_order(rng):
    tr = Tracer(Trace.empty(), rng)
    tr.sample(addr("z", 0), COIN)
    tr.sample(addr("a", 0), COIN)
    assert tr.trace().draw_log == (addr("z", 0), addr("a", 0))
