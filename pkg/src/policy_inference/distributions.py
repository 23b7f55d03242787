"""Prior descriptors for random-choice sites and policy parameters.

Only the primitives needed by the environments and the enumeration oracle
are supported.  Descriptors are frozen and hashable so that a recorded
trace entry can be checked against the prior declared at replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Distribution:
    """Base class.  Subclasses implement ``sample``, ``log_prob`` and ``in_support``."""

    discrete = False

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError

    def log_prob(self, x) -> float:
        raise NotImplementedError

    def in_support(self, x) -> bool:
        raise NotImplementedError

    def prob(self, x) -> float:
        return math.exp(self.log_prob(x))

    def enumerate_support(self):
        """(value, mass) pairs; only discrete distributions can do this."""
        raise TypeError(f"{type(self).__name__} has no finite support")


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: float

    discrete = True

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p must be in [0, 1], got {self.p}")

    def sample(self, rng):
        return bool(rng.random() < self.p)

    def in_support(self, x):
        if x is True or x is False:
            return (self.p > 0.0 or not x) and (self.p < 1.0 or x)
        return False

    def log_prob(self, x):
        if not self.in_support(x):
            return -math.inf
        return math.log(self.p if x else 1.0 - self.p)

    def enumerate_support(self):
        out = []
        if self.p < 1.0:
            out.append((False, 1.0 - self.p))
        if self.p > 0.0:
            out.append((True, self.p))
        return out


@dataclass(frozen=True)
class Categorical(Distribution):
    """Finite distribution over explicit ``values``; uniform when ``probs`` is omitted."""

    values: tuple
    probs: tuple = field(default=None)

    discrete = True

    def __post_init__(self):
        values = tuple(self.values)
        if not values:
            raise ValueError("Categorical needs at least one value")
        if len(set(values)) != len(values):
            raise ValueError("Categorical values must be distinct")
        if self.probs is None:
            probs = (1.0 / len(values),) * len(values)
        else:
            probs = tuple(float(p) for p in self.probs)
        if len(probs) != len(values) or any(p < 0 for p in probs):
            raise ValueError("Categorical probs must be nonnegative, one per value")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"Categorical probs sum to {sum(probs)}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(values)})
        object.__setattr__(self, "_cdf", np.cumsum(probs))

    # generated __eq__/__hash__ only look at declared fields
    def sample(self, rng):
        if len(self.values) == 1:
            return self.values[0]
        i = int(np.searchsorted(self._cdf, rng.random() * self._cdf[-1], side="right"))
        return self.values[min(i, len(self.values) - 1)]

    def in_support(self, x):
        i = self._index.get(x)
        return i is not None and self.probs[i] > 0.0

    def log_prob(self, x):
        i = self._index.get(x)
        if i is None or self.probs[i] == 0.0:
            return -math.inf
        return math.log(self.probs[i])

    def enumerate_support(self):
        return [(v, p) for v, p in zip(self.values, self.probs) if p > 0.0]


def point_mass(value) -> Categorical:
    return Categorical((value,))


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"Uniform needs low < high, got [{self.low}, {self.high}]")

    def sample(self, rng):
        return self.low + (self.high - self.low) * rng.random()

    def in_support(self, x):
        return isinstance(x, (float, int)) and self.low <= x <= self.high

    def log_prob(self, x):
        if not self.in_support(x):
            return -math.inf
        return -math.log(self.high - self.low)


@dataclass(frozen=True)
class Beta(Distribution):
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"Beta parameters must be positive, got {self.a}, {self.b}")

    def sample(self, rng):
        return float(rng.beta(self.a, self.b))

    def in_support(self, x):
        return isinstance(x, (float, int)) and 0.0 <= x <= 1.0

    def log_prob(self, x):
        if not self.in_support(x):
            return -math.inf
        if (x == 0.0 and self.a < 1) or (x == 1.0 and self.b < 1):
            return math.inf
        if (x == 0.0 and self.a > 1) or (x == 1.0 and self.b > 1):
            return -math.inf
        log_norm = math.lgamma(self.a + self.b) - math.lgamma(self.a) - math.lgamma(self.b)
        lx = math.log(x) if self.a != 1 else 0.0
        l1x = math.log1p(-x) if self.b != 1 else 0.0
        return log_norm + (self.a - 1) * lx + (self.b - 1) * l1x
