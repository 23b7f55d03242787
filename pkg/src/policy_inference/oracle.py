"""Exact enumeration of tiny discrete models.

Ground truth for the samplers: the exact posterior over theta of the
flattened linear-conditioning model, expected rewards, the two
mixture/conjunction identities, and the exact stationary distribution of
each sampler's Markov kernel.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np

from .conditioning import RewardBounds, exp_conditioning, linear_conditioning
from .distributions import Categorical, Distribution, Uniform
from .theta import ThetaVector
from .trace import Simulator, Trace, TraceError, Tracer, format_address

MAX_PAIRS = 10**6


class DegenerateModelError(ValueError):
    pass


@dataclass
class DiscreteModel:
    """Finite theta support x finite trace support with a total reward table.

    ``theta_factors`` / ``trace_factors`` optionally describe a product
    structure: one (value, mass) list per theta component / trace site, with
    supports equal to the Cartesian products and keys equal to value tuples.
    Single-site samplers need that structure to define their moves.
    """

    theta_support: list
    trace_support: list
    reward_table: dict
    bounds: RewardBounds
    theta_factors: list | None = None
    trace_factors: list | None = None
    theta_names: list | None = field(default=None, repr=False)
    trace_addresses: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.theta_support = [(k, float(m)) for k, m in self.theta_support]
        self.trace_support = [(k, float(m)) for k, m in self.trace_support]
        for name, support in (("theta", self.theta_support), ("trace", self.trace_support)):
            if not support:
                raise ValueError(f"empty {name} support")
            if any(m < 0 for _, m in support):
                raise ValueError(f"negative {name} mass")
            if abs(math.fsum(m for _, m in support) - 1.0) > 1e-12:
                raise ValueError(f"{name} masses do not sum to 1")
            if len({k for k, _ in support}) != len(support):
                raise ValueError(f"duplicate {name} keys")
        if len(self.theta_support) * len(self.trace_support) > MAX_PAIRS:
            raise ValueError(f"model exceeds {MAX_PAIRS} (theta, trace) pairs")
        for th, _ in self.theta_support:
            for tau, _ in self.trace_support:
                try:
                    r = self.reward_table[(th, tau)]
                except KeyError:
                    raise ValueError(f"reward table has no entry for {(th, tau)}") from None
                if not self.bounds.contains(r):
                    raise ValueError(f"reward {r} at {(th, tau)} outside {self.bounds}")

    @classmethod
    def from_function(cls, theta_masses: dict, trace_masses: dict,
                      reward: Callable[[Hashable, Hashable], float],
                      bounds: RewardBounds) -> "DiscreteModel":
        table = {(th, tau): reward(th, tau) for th in theta_masses for tau in trace_masses}
        return cls(list(theta_masses.items()), list(trace_masses.items()), table, bounds)

    @property
    def theta_keys(self) -> list:
        return [k for k, _ in self.theta_support]

    def theta_prior(self) -> dict:
        return dict(self.theta_support)

    def shifted(self, c: float) -> "DiscreteModel":
        """Every reward and both bounds shifted by ``c``."""
        return DiscreteModel(
            self.theta_support, self.trace_support,
            {k: r + c for k, r in self.reward_table.items()},
            RewardBounds(self.bounds.lower + c, self.bounds.upper + c),
            self.theta_factors, self.trace_factors, self.theta_names, self.trace_addresses)


def exact_expected_reward(model: DiscreteModel, theta) -> float:
    prior = model.theta_prior()
    if theta not in prior:
        raise KeyError(f"theta {theta!r} not in the model's support")
    return math.fsum(p * model.reward_table[(theta, tau)] for tau, p in model.trace_support)


def exact_posterior(model: DiscreteModel) -> dict:
    """Normalized ``p(theta) * (E[r | theta] - L)``."""
    lower = model.bounds.lower
    mass = {th: p * (exact_expected_reward(model, th) - lower) for th, p in model.theta_support}
    total = math.fsum(mass.values())
    if total <= 0:
        raise DegenerateModelError("all unnormalized posterior masses are zero")
    return {th: m / total for th, m in mass.items()}


def exact_argmax(model: DiscreteModel):
    post = exact_posterior(model)
    return max(post, key=post.get)


@dataclass(frozen=True)
class IdentityReport:
    conjunction_deviation: float
    mixture_deviation: float

    @property
    def max_deviation(self) -> float:
        return max(self.conjunction_deviation, self.mixture_deviation)


def mixture_identity_check(model: DiscreteModel) -> IdentityReport:
    """Max absolute deviations of the two decompositions over all theta.

    conjunction: prod_tau p_exp(r)^p(tau) == p_exp(E[r])
    mixture:     sum_tau p(tau) p_lin(r) == p_lin(E[r])
    """
    b = model.bounds
    conj = mix = 0.0
    for th, _ in model.theta_support:
        rs = [(model.reward_table[(th, tau)], p) for tau, p in model.trace_support]
        expected = sum(p * r for r, p in rs)
        lhs_conj = math.prod(exp_conditioning(r, b.upper) ** p for r, p in rs)
        conj = max(conj, abs(lhs_conj - exp_conditioning(expected, b.upper)))
        lhs_mix = sum(p * linear_conditioning(r, b) for r, p in rs)
        mix = max(mix, abs(lhs_mix - linear_conditioning(expected, b)))
    return IdentityReport(conj, mix)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def random_model(rng: np.random.Generator, max_theta: int = 5, max_traces: int = 6,
                 bounds: RewardBounds | None = None) -> DiscreteModel:
    """Random enumerable model with Dirichlet masses and uniform rewards in bounds."""
    if bounds is None:
        lo = float(rng.uniform(-10, 10))
        bounds = RewardBounds(lo, lo + float(rng.uniform(0.5, 20)))
    nt = int(rng.integers(1, max_theta + 1))
    nk = int(rng.integers(1, max_traces + 1))
    pt = rng.dirichlet(np.ones(nt))
    pk = rng.dirichlet(np.ones(nk))
    # renormalize in float so the masses pass the 1e-12 check
    pt = pt / math.fsum(pt)
    pk = pk / math.fsum(pk)
    table = {(i, j): float(rng.uniform(bounds.lower, bounds.upper))
             for i in range(nt) for j in range(nk)}
    return DiscreteModel(list(enumerate(pt.tolist())), list(enumerate(pk.tolist())),
                         table, bounds)


# ---------------------------------------------------------------------------
# running samplers on a table, and the samplers' exact stationary laws

class TableSimulator(Simulator):
    """Simulator whose reward is read off a :class:`DiscreteModel` table."""

    def __init__(self, model: DiscreteModel):
        self.model = model
        self.bounds = model.bounds
        if model.theta_factors is None:
            keys, masses = zip(*model.theta_support)
            self._theta_priors = (Categorical(tuple(range(len(keys))), masses),)
            self._theta_names = ("theta",)
            self._theta_key = lambda values: keys[values[0]]
        else:
            self._theta_priors = tuple(Categorical(*zip(*f)) for f in model.theta_factors)
            self._theta_names = tuple(model.theta_names or
                                      [f"theta{i}" for i in range(len(model.theta_factors))])
            self._theta_key = tuple
        if model.trace_factors is None:
            tkeys, tmasses = zip(*model.trace_support)
            self._trace_priors = (Categorical(tuple(range(len(tkeys))), tmasses),)
            self._trace_key = lambda values: tkeys[values[0]]
        else:
            self._trace_priors = tuple(Categorical(*zip(*f)) for f in model.trace_factors)
            self._trace_key = tuple
        self._addresses = tuple(((("tau", i),) for i in range(len(self._trace_priors))))

    def prior(self, rng):
        return ThetaVector.from_prior(self._theta_names, self._theta_priors, rng)

    def theta_key(self, theta: ThetaVector):
        return self._theta_key(theta.values)

    def run(self, theta, tracer):
        values = [tracer.sample(a, p) for a, p in zip(self._addresses, self._trace_priors)]
        return self.model.reward_table[(self._theta_key(theta.values), self._trace_key(values))]


def _factors(model: DiscreteModel):
    tf = model.theta_factors or [[(k, m) for k, m in model.theta_support]]
    kf = model.trace_factors or [[(k, m) for k, m in model.trace_support]]
    th_key = tuple if model.theta_factors else (lambda v: v[0])
    tr_key = tuple if model.trace_factors else (lambda v: v[0])
    return tf, kf, th_key, tr_key


def _accept(r_new, r_old, lower, temperature):
    # same rule as samplers.mh_accept_prob, restated for the oracle
    if r_old == lower:
        return 1.0
    return min(1.0, ((r_new - lower) / (r_old - lower)) ** (1.0 / temperature))


def _stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def sampler_stationary(model: DiscreteModel, mode: str = "mh",
                       temperature: float = 1.0) -> dict:
    """Exact stationary theta-marginal of a sampler's Markov kernel.

    ``mode="mh"``: whole-trace refresh, then a whole-theta prior proposal.
    ``mode="lmh"``: one site chosen uniformly among theta components and
    trace sites per step.  The chain is built over the product supports
    given by the model's factors.
    """
    tf, kf, th_key, tr_key = _factors(model)
    thetas = list(itertools.product(*[[v for v, _ in f] for f in tf]))
    taus = list(itertools.product(*[[v for v, _ in f] for f in kf]))
    th_mass = [math.prod(dict(f)[v] for f, v in zip(tf, th)) for th in thetas]
    tau_mass = [math.prod(dict(f)[v] for f, v in zip(kf, tau)) for tau in taus]
    lower = model.bounds.lower
    R = np.array([[model.reward_table[(th_key(th), tr_key(tau))] for tau in taus]
                  for th in thetas])
    nth, ntau = len(thetas), len(taus)
    if mode == "mh":
        K = np.zeros((nth, nth))
        for j in range(ntau):
            for a in range(nth):
                for b in range(nth):
                    if a != b:
                        K[a, b] += tau_mass[j] * th_mass[b] * _accept(R[b, j], R[a, j], lower,
                                                                       temperature)
        K[np.diag_indices(nth)] = 1.0 - K.sum(axis=1)
        pi = _stationary(K)
    elif mode == "lmh":
        th_index = {th: i for i, th in enumerate(thetas)}
        tau_index = {tau: i for i, tau in enumerate(taus)}
        n_sites = len(tf) + len(kf)
        N = nth * ntau
        K = np.zeros((N, N))
        for a, th in enumerate(thetas):
            for j, tau in enumerate(taus):
                s = a * ntau + j
                for c, f in enumerate(tf):
                    for v, m in f:
                        new = th[:c] + (v,) + th[c + 1:]
                        b = th_index[new]
                        acc = _accept(R[b, j], R[a, j], lower, temperature)
                        t = b * ntau + j
                        K[s, t] += m * acc / n_sites
                        K[s, s] += m * (1.0 - acc) / n_sites
                for c, f in enumerate(kf):
                    for v, m in f:
                        new = tau[:c] + (v,) + tau[c + 1:]
                        K[s, a * ntau + tau_index[new]] += m / n_sites
        pi = _stationary(K).reshape(nth, ntau).sum(axis=1)
    else:
        raise ValueError(f"unknown sampler mode {mode!r}")
    return {th_key(th): float(p) for th, p in zip(thetas, pi)}


# ---------------------------------------------------------------------------
# flattening simulators with discrete theta priors into DiscreteModels

class _Branch(Exception):
    def __init__(self, address, prior):
        self.address = address
        self.prior = prior


class _EnumTracer(Tracer):
    """Tracer that replays a forced prefix and stops at the first new site."""

    __slots__ = ("_forced", "_pos")

    def __init__(self, forced):
        super().__init__(Trace.empty(), None)
        self._forced = forced
        self._pos = 0

    def sample(self, address, prior):
        if self._pos < len(self._forced):
            a, value, _ = self._forced[self._pos]
            if a != address:
                raise TraceError("trace structure depends on the enumeration branch")
            self._pos += 1
            self._entries[address] = (value, prior)
            self._order.append(address)
            return value
        raise _Branch(address, prior)


def _site_support(prior: Distribution, address, uniform_cells) -> list:
    if prior.discrete:
        return prior.enumerate_support()
    if isinstance(prior, Uniform) and uniform_cells is not None:
        cuts = sorted({c for c in uniform_cells(address) if prior.low < c < prior.high})
        edges = [prior.low, *cuts, prior.high]
        width = prior.high - prior.low
        return [((lo + hi) / 2.0, (hi - lo) / width) for lo, hi in zip(edges, edges[1:])]
    raise TypeError(f"cannot enumerate site {format_address(address)} with prior {prior}")


def enumerate_traces(sim: Simulator, theta: ThetaVector, uniform_cells=None) -> list:
    """All full traces of ``sim`` at ``theta`` as (Trace, mass) pairs.

    Uniform sites are split into cells at the breakpoints returned by
    ``uniform_cells(address)``; the simulator must depend on such a site
    only through comparisons with those breakpoints.
    """
    out = []
    stack = [((), 1.0)]
    while stack:
        forced, mass = stack.pop()
        tracer = _EnumTracer(forced)
        try:
            sim.run(theta, tracer)
        except _Branch as br:
            for value, m in reversed(_site_support(br.prior, br.address, uniform_cells)):
                stack.append((forced + ((br.address, value, br.prior),), mass * m))
            continue
        out.append((tracer.trace(), mass))
        if len(out) > MAX_PAIRS:
            raise ValueError("trace space too large to enumerate")
    return out


def flatten_simulator(sim: Simulator, theta0: ThetaVector, uniform_cells=None) -> DiscreteModel:
    """Enumerate a simulator whose theta priors are all discrete.

    The trace structure (addresses and their priors) must not depend on
    theta; keys are value tuples in component / execution order.
    """
    theta_factors = [p.enumerate_support() for p in theta0.priors]
    traces = enumerate_traces(sim, theta0, uniform_cells)
    addresses = traces[0][0].draw_log
    trace_factors = [_site_support(traces[0][0].prior(a), a, uniform_cells) for a in addresses]
    theta_support = []
    for combo in itertools.product(*theta_factors):
        values = tuple(v for v, _ in combo)
        theta_support.append((values, math.prod(m for _, m in combo)))
    trace_support = [(t.values(), m) for t, m in traces]
    table = {}
    for th, _ in theta_support:
        theta = theta0.with_values(th)
        for t, _ in traces:
            tracer = _EnumTracer(tuple((a, t.value(a), t.prior(a)) for a in t.draw_log))
            try:
                r = sim.run(theta, tracer)
            except _Branch:
                raise TraceError("trace structure depends on theta") from None
            if tracer.trace().draw_log != addresses:
                raise TraceError("trace structure depends on theta")
            table[(th, t.values())] = r
    # float masses from products of cells can drift by an ulp; renormalize
    ts = math.fsum(m for _, m in theta_support)
    ks = math.fsum(m for _, m in trace_support)
    return DiscreteModel(
        [(k, m / ts) for k, m in theta_support], [(k, m / ks) for k, m in trace_support],
        table, sim.bounds, theta_factors=theta_factors, trace_factors=trace_factors,
        theta_names=list(theta0.names), trace_addresses=list(addresses))
