"""Conditioning probabilities for the auxiliary optimality variable.

A policy is scored by the Bernoulli success probability of an auxiliary
"optimal" variable given a reward.  Two forms are provided:

* exponential, ``exp(r - upper)``, which only admits nested estimation
  of the expected reward;
* linear, ``(r - lower) / (upper - lower)``, which commutes with the
  expectation over simulator outcomes and therefore can be flattened.

Every probability has a log-space twin; samplers use those.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ConditioningError(ValueError):
    """A reward fell outside the declared bounds."""


class ConditioningKind(enum.Enum):
    EXPONENTIAL = "exponential"
    LINEAR = "linear"


@dataclass(frozen=True)
class RewardBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"reward bounds must be finite, got {self}")
        if not self.lower < self.upper:
            raise ValueError(f"lower bound must be < upper bound, got {self}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, r: float) -> bool:
        return self.lower <= r <= self.upper


def exp_conditioning(r: float, upper: float) -> float:
    if r > upper:
        raise ConditioningError(f"reward {r} exceeds upper bound {upper}")
    return math.exp(r - upper)


def log_exp_conditioning(r: float, upper: float) -> float:
    if r > upper:
        raise ConditioningError(f"reward {r} exceeds upper bound {upper}")
    return r - upper


def linear_conditioning(r: float, bounds: RewardBounds) -> float:
    if not bounds.contains(r):
        raise ConditioningError(
            f"reward {r} outside [{bounds.lower}, {bounds.upper}]")
    return (r - bounds.lower) / (bounds.upper - bounds.lower)


def log_linear_conditioning(r: float, bounds: RewardBounds) -> float:
    p = linear_conditioning(r, bounds)
    return math.log(p) if p > 0.0 else -math.inf


def conditioning_prob(kind: ConditioningKind, r: float,
                      bounds: RewardBounds) -> float:
    if kind is ConditioningKind.EXPONENTIAL:
        return exp_conditioning(r, bounds.upper)
    return linear_conditioning(r, bounds)


def log_conditioning_prob(kind: ConditioningKind, r: float,
                          bounds: RewardBounds) -> float:
    if kind is ConditioningKind.EXPONENTIAL:
        return log_exp_conditioning(r, bounds.upper)
    return log_linear_conditioning(r, bounds)


def softplus_reward(r: float) -> float:
    """``log(exp(r) + 1)`` without overflow for large ``r``."""
    if r > 0.0:
        return r + math.log1p(math.exp(-r))
    return math.log1p(math.exp(r))
