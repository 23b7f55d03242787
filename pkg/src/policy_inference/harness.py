"""Experiment protocol: temperature sweeps, policy evaluation, CSV output.

For each temperature of a descending sweep the configured sampler is run
(annealing with warm starts by default), the mode estimate is read off the
chain and evaluated over fresh episodes.  Baselines are evaluated once:
random and clairvoyant agents for CTP, the heuristic threshold policy for
RockSample.  Every random stream derives from the configured seed.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .envs import ctp, rocksample
from .samplers import (
    Chain,
    ProposalMode,
    anneal_schedule_run,
    importance_sampling,
    make_rng,
    mode_estimate,
    resample_weighted,
)
from .theta import ThetaVector
from .trace import Simulator, Trace, Tracer

DEFAULT_TEMPERATURES = (100.0, 10.0, 1.0, 0.1, 0.01, 0.001)
OUT_DIR_ENV = "POLICY_INFERENCE_OUT"
DATA_DIR = Path(__file__).parent / "data"
# shipped evaluation instances
CTP_INSTANCE = "ctp20.json"
ROCKSAMPLE_INSTANCES = ("rs5x5m4.json", "rs7x7m8.json", "rs11x11m11.json", "rs15x15m15.json")
OPENNESS_LEVELS = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

SWEEP_HEADER = ["instance", "env", "tag", "temperature", "mean_reward", "std_error",
                "n_episodes", "theta_acceptance"]
PLOT_HEADER = ["instance", "series", "x_order", "temperature", "y", "y_lo", "y_hi"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    instance_path: str = ""
    temperatures: tuple = DEFAULT_TEMPERATURES
    iterations: int = 100_000
    eval_episodes: int = 10_000
    seed: int = 0
    sampler: str = "lmh"
    warm_start: bool = True
    burn_in_fraction: float = 0.1
    # rows kept per chain_<T>.csv; 0 writes no chain files
    chain_rows: int = 1000

    def __post_init__(self):
        if self.env not in ("ctp", "rocksample"):
            raise ConfigError(f"env must be 'ctp' or 'rocksample', got {self.env!r}")
        if self.sampler not in ("mh", "lmh", "is"):
            raise ConfigError(f"sampler must be mh, lmh or is, got {self.sampler!r}")
        temps = tuple(float(t) for t in self.temperatures)
        object.__setattr__(self, "temperatures", temps)
        if not temps or any(t <= 0 for t in temps):
            raise ConfigError("temperatures must be positive")
        if any(b >= a for a, b in zip(temps, temps[1:])):
            raise ConfigError("temperatures must be strictly descending")
        if self.iterations <= 0 or self.eval_episodes <= 0:
            raise ConfigError("iterations and eval_episodes must be positive")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigError("burn_in_fraction must be in [0, 1)")

    @property
    def burn_in(self) -> int:
        return int(self.iterations * self.burn_in_fraction)

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        data = read_json(path)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data, **overrides)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["temperatures"] = list(self.temperatures)
        return d


@dataclass(frozen=True)
class EvalSummary:
    temperature: float
    mean_reward: float
    std_error: float
    n_episodes: int
    tag: str
    theta_acceptance: float = math.nan
    instance: str = ""
    env: str = ""

    def __post_init__(self):
        if self.n_episodes <= 0:
            raise ValueError("n_episodes must be positive")
        if not self.std_error >= 0:
            raise ValueError("std_error must be nonnegative")

    def row(self) -> list:
        return [self.instance, self.env, self.tag, _fmt(self.temperature), _fmt(self.mean_reward),
                _fmt(self.std_error), str(self.n_episodes), _fmt(self.theta_acceptance)]


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def summarize(values, tag: str, temperature: float = math.nan, **kw) -> EvalSummary:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no episodes to summarize")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return EvalSummary(temperature, float(x.mean()), se, int(x.size), tag, **kw)


def evaluate_policy(sim: Simulator, theta, episodes: int, rng: np.random.Generator,
                    tag: str = "policy", temperature: float = math.nan) -> EvalSummary:
    """Mean raw reward over ``episodes`` fresh-trace episodes."""
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    rewards = [sim.raw_reward(theta, Tracer(Trace.empty(), rng)) for _ in range(episodes)]
    return summarize(rewards, tag, temperature)


# ---------------------------------------------------------------------------
# environment plumbing

def data_path(name: str) -> Path:
    """Path of an instance file shipped with the package."""
    return DATA_DIR / name


def load_instance(env: str, path):
    data = read_json(path)
    try:
        if env == "ctp":
            return ctp.CtpInstance.from_json(data)
        return rocksample.RockSampleInstance.from_json(data)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def make_simulator(env: str, instance) -> Simulator:
    if env == "ctp":
        return ctp.CtpSimulator(instance)
    return rocksample.RockSampleSimulator(instance)


def instance_label(config: ExperimentConfig) -> str:
    return Path(config.instance_path).stem if config.instance_path else config.env


class CtpEvaluator:
    """Evaluates CTP agents on a shared set of connected weathers.

    The clairvoyant distance is undefined when the goal is cut off, so all
    agents are compared on the same connected weathers.  Rewards are
    negative distances.
    """

    def __init__(self, sim: ctp.CtpSimulator, episodes: int, rng: np.random.Generator):
        self.sim = sim
        self.weathers = [ctp.sample_connected_weather(sim.instance, rng) for _ in range(episodes)]
        self.rng = rng

    def policy(self, theta, **kw) -> EvalSummary:
        return summarize([-self.sim.distance(theta, w) for w in self.weathers], "policy", **kw)

    def posterior(self, chain: Chain, **kw) -> EvalSummary:
        idx = self.rng.integers(len(chain.records), size=len(self.weathers))
        return summarize([-self.sim.distance(chain.records[i].theta, w)
                          for i, w in zip(idx, self.weathers)], "posterior", **kw)

    def clairvoyant(self) -> EvalSummary:
        return summarize([-ctp.clairvoyant_distance(self.sim.instance, w) for w in self.weathers],
                         "clairvoyant")

    def random(self) -> EvalSummary:
        adj = self.sim.instance.incident()
        return summarize([-ctp.random_agent_distance(self.sim.instance, w, self.rng, adj)
                          for w in self.weathers], "random")


class EpisodeEvaluator:
    """Fresh-trace evaluation with common random numbers across policies."""

    def __init__(self, sim: Simulator, episodes: int, seed: np.random.SeedSequence):
        self.sim = sim
        self.episodes = episodes
        self.seed = seed

    def policy(self, theta, **kw) -> EvalSummary:
        rng = make_rng(self.seed)
        return summarize([self.sim.raw_reward(theta, Tracer(Trace.empty(), rng))
                          for _ in range(self.episodes)], "policy", **kw)

    def heuristic(self) -> EvalSummary:
        inst = self.sim.instance
        s = self.policy(rocksample.heuristic_policy(inst))
        return dataclasses.replace(s, tag="heuristic")


# ---------------------------------------------------------------------------
# inference

@dataclass
class InferenceResult:
    temperatures: list
    modes: list
    chains: list = field(default_factory=list)

    @property
    def theta_mode(self):
        return self.modes[-1]


def run_inference(config: ExperimentConfig, sim: Simulator,
                  rng: np.random.Generator) -> InferenceResult:
    theta0 = sim.prior(rng)
    temps = list(config.temperatures)
    if config.sampler == "is":
        samples = importance_sampling(sim, config.iterations, rng, theta0)
        modes = [resample_weighted(samples, rng, t) for t in temps]
        return InferenceResult(temps, modes, [])
    mode = ProposalMode.WHOLE_THETA if config.sampler == "mh" else ProposalMode.SINGLE_SITE
    _, chains = anneal_schedule_run(sim, theta0, temps, config.iterations, rng,
                                    burn_in=config.burn_in, proposal_mode=mode,
                                    warm_start=config.warm_start)
    return InferenceResult(temps, [mode_estimate(c) for c in chains], chains)


def _streams(seed: int) -> dict:
    names = ("inference", "evaluation", "baselines")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def run_sweep(config: ExperimentConfig, out_dir=None, instance=None) -> list[EvalSummary]:
    """Full protocol; writes sweep.csv and chain_<T>.csv into ``out_dir``."""
    if instance is None:
        instance = load_instance(config.env, config.instance_path)
    sim = make_simulator(config.env, instance)
    streams = _streams(config.seed)
    result = run_inference(config, sim, make_rng(streams["inference"]))
    label = instance_label(config)

    rows = []
    if config.env == "ctp":
        ev = CtpEvaluator(sim, config.eval_episodes, make_rng(streams["evaluation"]))
    else:
        ev = EpisodeEvaluator(sim, config.eval_episodes, streams["evaluation"])
    for i, (t, theta) in enumerate(zip(result.temperatures, result.modes)):
        acc = result.chains[i].state.theta_acceptance_rate if result.chains else math.nan
        rows.append(ev.policy(theta, temperature=t, theta_acceptance=acc))
    if config.env == "ctp":
        ev.rng = make_rng(streams["baselines"])
        rows += [ev.random(), ev.clairvoyant()]
    else:
        rows.append(ev.heuristic())
    rows = [dataclasses.replace(r, instance=label, env=config.env) for r in rows]

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out_dir / "sweep.csv")
        if config.chain_rows:
            for chain in result.chains:
                write_chain_csv(chain, out_dir / f"chain_{chain.temperature:g}.csv",
                                max_rows=config.chain_rows)
        (out_dir / "theta_mode.json").write_text(result.theta_mode.to_json() + "\n")
    return rows


def openness_sweep(config: ExperimentConfig, levels: Sequence[float] = OPENNESS_LEVELS,
                   out_dir=None) -> dict[float, list[EvalSummary]]:
    """Repeats the CTP sweep with every edge's open probability set to each level."""
    if config.env != "ctp":
        raise ConfigError("openness sweeps apply to ctp only")
    base = load_instance("ctp", config.instance_path)
    label = instance_label(config)
    results = {}
    for p in levels:
        sub = None if out_dir is None else Path(out_dir) / f"p{p:g}"
        rows = run_sweep(config, sub, base.with_open_prob(p))
        results[p] = [dataclasses.replace(r, instance=f"{label}_p{p:g}") for r in rows]
        if sub is not None:
            write_sweep_csv(results[p], sub / "sweep.csv")
    return results


def default_out_dir(fallback="results") -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, fallback))


# ---------------------------------------------------------------------------
# CSV

def write_sweep_csv(rows: Sequence[EvalSummary], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow(r.row())


def read_sweep_csv(path) -> list[EvalSummary]:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ConfigError(f"{path}:1: expected header {SWEEP_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(SWEEP_HEADER):
                raise ConfigError(f"{path}:{lineno}: expected {len(SWEEP_HEADER)} fields")
            try:
                inst, env, tag, t, mean, se, n, acc = row
                out.append(EvalSummary(_parse(t), float(mean), float(se), int(n), tag,
                                       _parse(acc), inst, env))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def _parse(s: str) -> float:
    return float(s) if s else math.nan


def write_chain_csv(chain: Chain, path, max_rows: int | None = None):
    records = chain.records
    step = 1
    if max_rows and len(records) > max_rows:
        step = math.ceil(len(records) / max_rows)
    names = records[0].theta.names if records else ()
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "temperature", "reward", "accepted", "move", *names])
        for r in records[::step]:
            w.writerow([r.iteration, _fmt(r.temperature), _fmt(r.reward), int(r.accepted),
                        r.move, *(_fmt(v) if isinstance(v, float) else v for v in r.theta.values)])


def write_trace_csv(trace: Trace, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["address", "value"])
        w.writerows(trace.to_rows())


def emit_plot_data(sweep_csv, out=None) -> str:
    """Long-format plot table: one row per (instance, series, temperature).

    ``x_order`` ranks temperatures from hottest (0) on a log axis; baseline
    rows have an empty temperature and x_order -1.
    """
    rows = read_sweep_csv(sweep_csv)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for inst in dict.fromkeys(r.instance for r in rows):
        group = [r for r in rows if r.instance == inst]
        temps = sorted({r.temperature for r in group if not math.isnan(r.temperature)},
                       reverse=True)
        order = {t: i for i, t in enumerate(temps)}
        for r in group:
            x = -1 if math.isnan(r.temperature) else order[r.temperature]
            w.writerow([inst, r.tag, x, _fmt(r.temperature), _fmt(r.mean_reward),
                        _fmt(r.mean_reward - r.std_error), _fmt(r.mean_reward + r.std_error)])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def read_plot_data(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def load_theta(sim: Simulator, path) -> ThetaVector:
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: theta file must map component names to values")
    template = ThetaVector(sim.names, [0.5] * len(sim.names), sim.priors)
    try:
        return template.load_values(data)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
