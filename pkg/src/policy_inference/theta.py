"""Policy parameter vectors with per-component priors."""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from .distributions import Distribution


class ThetaVector:
    """Ordered, named policy parameters, each with its own prior.

    Instances are immutable; :meth:`replace` and :meth:`with_values`
    return new vectors that share the name and prior tuples.
    """

    __slots__ = ("names", "values", "priors", "_index")

    def __init__(self, names: Sequence[str], values: Sequence, priors: Sequence[Distribution],
                 _index=None):
        names = tuple(names)
        values = tuple(values)
        priors = tuple(priors)
        if not len(names) == len(values) == len(priors):
            raise ValueError("names, values and priors must have equal length")
        if _index is None:
            _index = {n: i for i, n in enumerate(names)}
            if len(_index) != len(names):
                raise ValueError("theta component names must be unique")
            for n, v, p in zip(names, values, priors):
                if not p.in_support(v):
                    raise ValueError(f"theta[{n!r}] = {v!r} outside the support of {p}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "_index", _index)

    def __setattr__(self, key, value):
        raise AttributeError("ThetaVector is immutable")

    @classmethod
    def from_prior(cls, names: Sequence[str], priors: Sequence[Distribution],
                   rng: np.random.Generator) -> "ThetaVector":
        return cls(names, [p.sample(rng) for p in priors], priors)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name: str):
        return self.values[self._index[name]]

    def __iter__(self):
        return iter(zip(self.names, self.values))

    def __eq__(self, other):
        if not isinstance(other, ThetaVector):
            return NotImplemented
        return (self.names == other.names and self.values == other.values
                and self.priors == other.priors)

    def __hash__(self):
        return hash((self.names, self.values))

    def __repr__(self):
        body = ", ".join(f"{n}={v!r}" for n, v in self)
        return f"ThetaVector({body})"

    def index(self, name: str) -> int:
        return self._index[name]

    def replace(self, i: int, value) -> "ThetaVector":
        if not self.priors[i].in_support(value):
            raise ValueError(f"theta[{self.names[i]!r}] = {value!r} outside its prior's support")
        values = list(self.values)
        values[i] = value
        return ThetaVector(self.names, values, self.priors, _index=self._index)

    def with_values(self, values: Iterable) -> "ThetaVector":
        values = tuple(values)
        if len(values) != len(self.values):
            raise ValueError("wrong number of theta values")
        for n, v, p in zip(self.names, values, self.priors):
            if not p.in_support(v):
                raise ValueError(f"theta[{n!r}] = {v!r} outside the support of {p}")
        return ThetaVector(self.names, values, self.priors, _index=self._index)

    def redraw_all(self, rng: np.random.Generator) -> "ThetaVector":
        return ThetaVector(self.names, [p.sample(rng) for p in self.priors],
                           self.priors, _index=self._index)

    def redraw(self, i: int, rng: np.random.Generator) -> "ThetaVector":
        return self.replace(i, self.priors[i].sample(rng))

    def log_prior(self) -> float:
        return sum(p.log_prob(v) for v, p in zip(self.values, self.priors))

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    def load_values(self, mapping: dict) -> "ThetaVector":
        """Values from a name -> value mapping (e.g. a ``--theta`` file)."""
        missing = [n for n in self.names if n not in mapping]
        if missing:
            raise ValueError(f"theta file is missing components: {missing[:5]}")
        return self.with_values(mapping[n] for n in self.names)
