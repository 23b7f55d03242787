"""RockSample with a per-rock sensing-threshold policy.

The rover starts in the middle of the left edge of an n x n field and
leaves through the right edge.  Rocks are considered nearest-first
(Manhattan distance, ties by index).  Each is sensed once from the
rover's current position; the reading is correct with probability
``0.5 + 0.5 * 2 ** (-distance / d0)``.  The rover visits the rock when its
posterior belief that the rock is good reaches the rock's threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..conditioning import RewardBounds, softplus_reward
from ..distributions import Bernoulli, Uniform
from ..theta import ThetaVector
from ..trace import Simulator, Tracer, addr


class InvalidInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class RockSampleInstance:
    n: int
    rocks: tuple
    good_prior: float = 0.5
    d0: float | None = None
    step_cost: float = -1.0
    rock_reward: float = 10.0
    exit_reward: float = 10.0
    max_steps: int | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        rocks = tuple((int(x), int(y)) for x, y in self.rocks)
        object.__setattr__(self, "rocks", rocks)
        if self.n <= 0:
            raise InvalidInstanceError("grid side must be positive")
        if len(set(rocks)) != len(rocks):
            raise InvalidInstanceError("rock positions must be distinct")
        for x, y in rocks:
            if not (0 <= x < self.n and 0 <= y < self.n):
                raise InvalidInstanceError(f"rock ({x}, {y}) outside the {self.n}x{self.n} grid")
        if not 0.0 <= self.good_prior <= 1.0:
            raise InvalidInstanceError("good_prior must be a probability")
        if self.d0 is None:
            object.__setattr__(self, "d0", self.n / 2.0)
        if not self.d0 > 0:
            raise InvalidInstanceError("sensor half distance must be positive")
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", 4 * self.n * (len(rocks) + 1))
        if not (isinstance(self.max_steps, int) and self.max_steps > 0):
            raise InvalidInstanceError("max_steps must be a positive integer")

    @property
    def start(self) -> tuple[int, int]:
        return (0, self.n // 2)

    def to_json(self) -> dict:
        return {"name": self.name, "n": self.n, "rocks": [{"x": x, "y": y} for x, y in self.rocks],
                "good_prior": self.good_prior, "d0": self.d0,
                "rewards": {"step": self.step_cost, "rock": self.rock_reward,
                            "exit": self.exit_reward},
                "max_steps": self.max_steps}

    @classmethod
    def from_json(cls, data: dict) -> "RockSampleInstance":
        try:
            rewards = data.get("rewards", {})
            return cls(int(data["n"]), tuple((r["x"], r["y"]) for r in data["rocks"]),
                       float(data.get("good_prior", 0.5)),
                       None if data.get("d0") is None else float(data["d0"]),
                       float(rewards.get("step", -1.0)), float(rewards.get("rock", 10.0)),
                       float(rewards.get("exit", 10.0)),
                       None if data.get("max_steps") is None else int(data["max_steps"]),
                       data.get("name", ""))
        except (KeyError, TypeError) as exc:
            raise InvalidInstanceError(f"malformed RockSample instance: {exc!r}") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "RockSampleInstance":
        return cls.from_json(json.loads(Path(path).read_text()))


def sensor_accuracy(distance: float, d0: float) -> float:
    if distance < 0:
        raise ValueError("distance must be nonnegative")
    return 0.5 + 0.5 * 2.0 ** (-distance / d0)


def belief_good(sensed_good: bool, accuracy: float, good_prior: float) -> float:
    """Posterior probability that a rock is good after one reading."""
    if sensed_good:
        num = accuracy * good_prior
        den = num + (1.0 - accuracy) * (1.0 - good_prior)
    else:
        num = (1.0 - accuracy) * good_prior
        den = num + accuracy * (1.0 - good_prior)
    return num / den if den > 0 else good_prior


def rocksample_bounds(instance: RockSampleInstance) -> RewardBounds:
    """Bounds in softplus space; crossing the field takes ``n`` steps."""
    best_raw = (instance.rock_reward * len(instance.rocks) + instance.exit_reward
                + instance.step_cost * instance.n)
    worst_raw = instance.step_cost * instance.max_steps
    lo, hi = softplus_reward(worst_raw), softplus_reward(best_raw)
    if not lo < hi:
        raise InvalidInstanceError(f"degenerate bounds: softplus({worst_raw}) >= softplus({best_raw})")
    return RewardBounds(lo, hi)


def heuristic_policy(instance: RockSampleInstance) -> list[float]:
    return [0.5] * len(instance.rocks)


@dataclass
class Episode:
    raw_reward: float
    steps: int
    visited: list
    sampled_good: int
    exited: bool
    path: list = field(default_factory=list)


class RockSampleSimulator(Simulator):
    """Reward is the softplus of the raw episode return; raw return is kept for evaluation."""

    def __init__(self, instance: RockSampleInstance, theta_priors: dict | None = None):
        self.instance = instance
        self.bounds = rocksample_bounds(instance)
        self.names = [f"t{i}" for i in range(len(instance.rocks))]
        theta_priors = theta_priors or {}
        default = Uniform(0.0, 1.0)
        self.priors = [theta_priors.get(n, default) for n in self.names]
        good = Bernoulli(instance.good_prior)
        noise = Uniform(0.0, 1.0)
        m = len(instance.rocks)
        self._sites = ([(addr("good", i), good) for i in range(m)]
                       + [(addr("sense", i), noise) for i in range(m)])

    def prior(self, rng):
        return ThetaVector.from_prior(self.names, self.priors, rng)

    def theta(self, values) -> ThetaVector:
        return ThetaVector(self.names, values, self.priors)

    def episode(self, theta, tracer: Tracer, keep_path: bool = False) -> Episode:
        inst = self.instance
        thresholds = theta.values if isinstance(theta, ThetaVector) else theta
        draws = [tracer.sample(a, p) for a, p in self._sites]
        m = len(inst.rocks)
        quality, noise = draws[:m], draws[m:]
        x, y = inst.start
        steps, total = 0, 0.0
        visited, n_good = [], 0
        path = [(x, y)] if keep_path else []
        remaining = list(range(m))

        def move(k):
            # returns False when the horizon truncates the move
            nonlocal steps, total
            if steps + k > inst.max_steps:
                total += inst.step_cost * (inst.max_steps - steps)
                steps = inst.max_steps
                return False
            steps += k
            total += inst.step_cost * k
            return True

        while remaining:
            i = min(remaining, key=lambda j: (abs(inst.rocks[j][0] - x)
                                              + abs(inst.rocks[j][1] - y), j))
            remaining.remove(i)
            rx, ry = inst.rocks[i]
            acc = sensor_accuracy(math.hypot(rx - x, ry - y), inst.d0)
            sensed = quality[i] if noise[i] < acc else not quality[i]
            if belief_good(sensed, acc, inst.good_prior) >= thresholds[i]:
                if not move(abs(rx - x) + abs(ry - y)):
                    return Episode(total, steps, visited, n_good, False, path)
                x, y = rx, ry
                if keep_path:
                    path.append((x, y))
                visited.append(i)
                if quality[i]:
                    total += inst.rock_reward
                    n_good += 1
        if not move(inst.n - x):
            return Episode(total, steps, visited, n_good, False, path)
        total += inst.exit_reward
        if keep_path:
            path.append((inst.n, y))
        return Episode(total, steps, visited, n_good, True, path)

    def raw_reward(self, theta, tracer):
        return self.episode(theta, tracer).raw_reward

    def run(self, theta, tracer):
        return softplus_reward(self.episode(theta, tracer).raw_reward)

    def uniform_cells(self, address) -> list[float]:
        """Sensor accuracies at every distance that can occur on the grid; a
        sensing site only matters through comparisons with these."""
        n = self.instance.n
        dists = {math.hypot(dx, dy) for dx in range(n + 1) for dy in range(n)}
        return sorted(sensor_accuracy(d, self.instance.d0) for d in dists)


def generate_instance(n: int, m: int, seed: int = 0, name: str = "",
                      **kwargs) -> RockSampleInstance:
    """``m`` distinct rock cells drawn uniformly, avoiding the start cell."""
    rng = np.random.default_rng(seed)
    start = (0, n // 2)
    cells = [(x, y) for x in range(n) for y in range(n) if (x, y) != start]
    if m > len(cells):
        raise ValueError("too many rocks for the grid")
    idx = rng.choice(len(cells), size=m, replace=False)
    rocks = tuple(cells[int(i)] for i in sorted(idx))
    return RockSampleInstance(n, rocks, name=name or f"rs{n}x{n}m{m}", **kwargs)


def toy_instance() -> RockSampleInstance:
    """3x3 field, one rock diagonal to the start."""
    return RockSampleInstance(3, ((1, 0),), name="toy3x3")


EVAL_SHAPES = ((5, 4), (7, 8), (11, 11), (15, 15))
