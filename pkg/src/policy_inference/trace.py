"""Traces of random choices.

A stochastic simulator ``S(theta)`` becomes a deterministic procedure
``P(theta, tau)`` once every random choice it makes is read from a trace
``tau``.  Simulators request randomness through a :class:`Tracer` handle,
naming each choice site with an explicit structural address.  Replaying
follows the usual lightweight MH reuse rule: recorded values are reused at
matching addresses, new sites are drawn from their prior, and entries not
visited by the run are dropped.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .conditioning import ConditioningKind, RewardBounds
from .distributions import Distribution


class TraceError(Exception):
    pass


class TraceIncompatibilityError(TraceError):
    """A recorded value was produced under a different prior than the site declares."""


class DuplicateAddressError(TraceError):
    pass


def addr(*parts) -> tuple:
    """Build an address from alternating labels and indices.

    >>> addr("edge", 3)
    (('edge', 3),)
    >>> addr("rock", 1, "sense", 0)
    (('rock', 1), ('sense', 0))
    """
    if not parts or len(parts) % 2:
        raise ValueError("address needs (label, index) pairs")
    out = []
    for label, index in zip(parts[::2], parts[1::2]):
        if not isinstance(label, str) or not label:
            raise ValueError(f"address label must be a non-empty string, got {label!r}")
        if not isinstance(index, (int, np.integer)) or index < 0:
            raise ValueError(f"address index must be a nonnegative integer, got {index!r}")
        out.append((label, int(index)))
    return tuple(out)


def format_address(address: tuple) -> str:
    return "/".join(f"{label}:{index}" for label, index in address)


def parse_address(text: str) -> tuple:
    parts = []
    for chunk in text.split("/"):
        label, _, index = chunk.rpartition(":")
        parts += [label, int(index)]
    return addr(*parts)


class Trace:
    """Immutable address-keyed record of the random choices of one run.

    ``entries`` maps address -> (value, prior); ``draw_log`` lists the
    addresses in execution order.  An empty trace is the "draw everything
    fresh" marker.
    """

    __slots__ = ("entries", "draw_log")

    def __init__(self, entries: dict | None = None, draw_log: tuple | None = None):
        entries = {} if entries is None else entries
        if draw_log is None:
            draw_log = tuple(entries)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "draw_log", tuple(draw_log))

    def __setattr__(self, key, value):
        raise AttributeError("Trace is immutable")

    @classmethod
    def empty(cls) -> "Trace":
        return _EMPTY

    @classmethod
    def from_choices(cls, choices) -> "Trace":
        """Trace from an iterable of (address, value, prior), validating support."""
        entries = {}
        for address, value, prior in choices:
            if address in entries:
                raise DuplicateAddressError(format_address(address))
            if not prior.in_support(value):
                raise ValueError(f"{format_address(address)} = {value!r} outside {prior}")
            entries[address] = (value, prior)
        return cls(entries)

    def __len__(self):
        return len(self.draw_log)

    def __contains__(self, address):
        return address in self.entries

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.draw_log)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.draw_log == other.draw_log and self.entries == other.entries

    def __hash__(self):
        return hash(tuple((a, self.entries[a][0]) for a in self.draw_log))

    def __repr__(self):
        body = ", ".join(f"{format_address(a)}={self.entries[a][0]!r}" for a in self.draw_log)
        return f"Trace({body})"

    def value(self, address):
        return self.entries[address][0]

    def prior(self, address) -> Distribution:
        return self.entries[address][1]

    def values(self) -> tuple:
        """Values in execution order."""
        return tuple(self.entries[a][0] for a in self.draw_log)

    def log_prob(self) -> float:
        return sum(prior.log_prob(value) for value, prior in self.entries.values())

    def prob(self) -> float:
        return math.exp(self.log_prob())

    def to_rows(self) -> list[tuple[str, object]]:
        return [(format_address(a), self.entries[a][0]) for a in self.draw_log]


_EMPTY = Trace()


class Tracer:
    """Handle passed to a simulator run; serves random choices by address."""

    __slots__ = ("_old", "_rng", "_entries", "_order")

    def __init__(self, old: Trace, rng: np.random.Generator):
        self._old = old.entries
        self._rng = rng
        self._entries = {}
        self._order = []

    def sample(self, address: tuple, prior: Distribution):
        if address in self._entries:
            raise DuplicateAddressError(format_address(address))
        old = self._old.get(address)
        if old is None:
            value = prior.sample(self._rng)
        else:
            value, old_prior = old
            if old_prior is not prior and old_prior != prior:
                raise TraceIncompatibilityError(
                    f"{format_address(address)}: recorded under {old_prior}, site declares {prior}")
        self._entries[address] = (value, prior)
        self._order.append(address)
        return value

    def trace(self) -> Trace:
        return Trace(self._entries, self._order)


class Simulator:
    """Behavioral contract for a trace-parameterized simulator.

    Subclasses set ``bounds`` and implement :meth:`prior` (the initial
    theta with its priors) and :meth:`run`.  ``run`` must be a deterministic
    function of (theta, recorded choices), terminate after a bounded number
    of steps, and return a reward within ``bounds``.
    """

    bounds: RewardBounds
    conditioning = ConditioningKind.LINEAR

    def prior(self, rng: np.random.Generator):
        raise NotImplementedError

    def run(self, theta, tracer: Tracer) -> float:
        raise NotImplementedError

    def raw_reward(self, theta, tracer: Tracer) -> float:
        """Reward reported by evaluation; differs from :meth:`run` when conditioning
        uses a transformed reward."""
        return self.run(theta, tracer)


def run_with_trace(sim: Simulator, theta, trace: Trace,
                   rng: np.random.Generator) -> tuple[float, Trace]:
    tracer = Tracer(trace, rng)
    reward = sim.run(theta, tracer)
    return reward, tracer.trace()


def resample_all(trace: Trace, rng: np.random.Generator | None = None) -> Trace:
    """Fresh-trace marker: the next run draws every site from its prior."""
    return _EMPTY


def resample_site(trace: Trace, address: tuple, rng: np.random.Generator) -> Trace:
    try:
        _, prior = trace.entries[address]
    except KeyError:
        raise TraceError(f"address {format_address(address)} not in trace") from None
    entries = dict(trace.entries)
    entries[address] = (prior.sample(rng), prior)
    return Trace(entries, trace.draw_log)
