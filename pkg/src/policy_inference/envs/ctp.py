"""Canadian Traveller Problem.

An agent crosses an undirected graph whose edges are each open with a
known probability.  The agent runs a depth-first search from ``start``;
at every node it tries the open edges to unvisited neighbours in
decreasing order of its policy weights, backtracking over the entry edge
from dead ends.  The reward is the negative travel distance.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..conditioning import RewardBounds
from ..distributions import Bernoulli, Categorical, Uniform, point_mass
from ..theta import ThetaVector
from ..trace import Simulator, Tracer, addr


class InvalidInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float
    open_prob: float = 1.0


@dataclass(frozen=True)
class CtpInstance:
    nodes: int
    edges: tuple
    start: int
    goal: int
    # optional node coordinates, carried through JSON for plotting
    coords: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(
            e if isinstance(e, Edge) else Edge(*e) for e in self.edges))
        if self.nodes <= 0:
            raise InvalidInstanceError("instance needs at least one node")
        for name in ("start", "goal"):
            if not 0 <= getattr(self, name) < self.nodes:
                raise InvalidInstanceError(f"{name} node out of range")
        seen = set()
        for i, e in enumerate(self.edges):
            if e.u == e.v:
                raise InvalidInstanceError(f"edge {i} is a self-loop")
            if not (0 <= e.u < self.nodes and 0 <= e.v < self.nodes):
                raise InvalidInstanceError(f"edge {i} references a missing node")
            key = frozenset((e.u, e.v))
            if key in seen:
                raise InvalidInstanceError(f"edge {i} duplicates an earlier edge")
            seen.add(key)
            if not (math.isfinite(e.length) and e.length > 0):
                raise InvalidInstanceError(f"edge {i} length must be positive and finite")
            if not 0.0 < e.open_prob <= 1.0:
                raise InvalidInstanceError(f"edge {i} open_prob must be in (0, 1]")
        if math.isinf(shortest_path(self, (True,) * len(self.edges))):
            raise InvalidInstanceError("start and goal are disconnected in the full graph")

    def with_open_prob(self, p: float) -> "CtpInstance":
        return replace(self, edges=tuple(replace(e, open_prob=p) for e in self.edges))

    def incident(self) -> list[list[tuple[int, int, float]]]:
        """Per node: (edge id, neighbour, length), by edge id."""
        adj = [[] for _ in range(self.nodes)]
        for i, e in enumerate(self.edges):
            adj[e.u].append((i, e.v, e.length))
            adj[e.v].append((i, e.u, e.length))
        return adj

    def to_json(self) -> dict:
        out = {"nodes": self.nodes, "start": self.start, "goal": self.goal,
               "edges": [{"u": e.u, "v": e.v, "length": e.length, "open_prob": e.open_prob}
                         for e in self.edges]}
        if self.coords is not None:
            out["coords"] = [list(c) for c in self.coords]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CtpInstance":
        try:
            edges = tuple(Edge(int(e["u"]), int(e["v"]), float(e["length"]),
                               float(e.get("open_prob", 1.0))) for e in data["edges"])
            coords = data.get("coords")
            return cls(int(data["nodes"]), edges, int(data["start"]), int(data["goal"]),
                       tuple(tuple(c) for c in coords) if coords else None)
        except (KeyError, TypeError) as exc:
            raise InvalidInstanceError(f"malformed CTP instance: {exc!r}") from None

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "CtpInstance":
        return cls.from_json(json.loads(Path(path).read_text()))


def shortest_path(instance: CtpInstance, weather) -> float:
    """Dijkstra over open edges; ``inf`` when the goal is cut off."""
    adj = [[] for _ in range(instance.nodes)]
    for i, e in enumerate(instance.edges):
        if weather[i]:
            adj[e.u].append((e.v, e.length))
            adj[e.v].append((e.u, e.length))
    dist = [math.inf] * instance.nodes
    dist[instance.start] = 0.0
    heap = [(0.0, instance.start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == instance.goal:
            return d
        if d > dist[u]:
            continue
        for v, length in adj[u]:
            nd = d + length
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return math.inf


def clairvoyant_distance(instance: CtpInstance, weather) -> float:
    return shortest_path(instance, weather)


def connected(instance: CtpInstance, weather) -> bool:
    return not math.isinf(shortest_path(instance, weather))


def sample_weather(instance: CtpInstance, rng: np.random.Generator) -> tuple:
    u = rng.random(len(instance.edges))
    return tuple(bool(x < e.open_prob) for x, e in zip(u, instance.edges))


def sample_connected_weather(instance: CtpInstance, rng: np.random.Generator,
                             max_tries: int = 100_000) -> tuple:
    for _ in range(max_tries):
        w = sample_weather(instance, rng)
        if connected(instance, w):
            return w
    raise RuntimeError("could not sample a connected weather; open probabilities too low")


def dfs_distance(instance: CtpInstance, weather, priority, adj=None,
                 param_index=None) -> float | None:
    """Travel distance of the DFS agent, or None if it exhausts its component.

    ``priority[param_index[node][k]]`` ranks the k-th incident edge of
    ``node``; higher is tried first, ties go to the lower edge id.
    """
    if adj is None:
        adj = instance.incident()
    if param_index is None:
        param_index = _param_index(adj)
    goal = instance.goal
    node = instance.start
    visited = {node}
    # stack of (node, entry edge length, ordered candidates, next candidate position)
    cands = _ordered(adj[node], param_index[node], weather, priority)
    stack = [[node, 0.0, cands, 0]]
    dist = 0.0
    while True:
        if node == goal:
            return dist
        frame = stack[-1]
        cands, pos = frame[2], frame[3]
        while pos < len(cands) and cands[pos][1] in visited:
            pos += 1
        if pos < len(cands):
            _, nb, length = cands[pos]
            frame[3] = pos + 1
            visited.add(nb)
            dist += length
            node = nb
            stack.append([nb, length, _ordered(adj[nb], param_index[nb], weather, priority), 0])
        else:
            stack.pop()
            if not stack:
                return None
            dist += frame[1]
            node = stack[-1][0]


def _ordered(incident, params, weather, priority):
    opened = [(-priority[p], eid, nb, length)
              for (eid, nb, length), p in zip(incident, params) if weather[eid]]
    opened.sort()
    return [(eid, nb, length) for _, eid, nb, length in opened]


def _param_index(adj):
    out, k = [], 0
    for node_edges in adj:
        out.append(list(range(k, k + len(node_edges))))
        k += len(node_edges)
    return out


def ctp_bounds(instance: CtpInstance) -> RewardBounds:
    best = shortest_path(instance, (True,) * len(instance.edges))
    if math.isinf(best):
        raise InvalidInstanceError("start and goal are disconnected in the full graph")
    total = math.fsum(e.length for e in instance.edges)
    return RewardBounds(-2.0 * total, -best)


def policy_names(instance: CtpInstance) -> list[str]:
    """One weight per (node, incident edge) pair, node-major, edge id order."""
    return [f"w{node}_e{eid}" for node, inc in enumerate(instance.incident())
            for eid, _, _ in inc]


class CtpSimulator(Simulator):
    """DFS traveller whose edge ordering is set by theta.

    ``theta_priors`` maps weight names to priors; the rest default to
    Uniform(0, 1).
    """

    def __init__(self, instance: CtpInstance, theta_priors: dict | None = None):
        self.instance = instance
        self.bounds = ctp_bounds(instance)
        self._adj = instance.incident()
        self._param_index = _param_index(self._adj)
        self.names = policy_names(instance)
        theta_priors = theta_priors or {}
        unknown = set(theta_priors) - set(self.names)
        if unknown:
            raise ValueError(f"unknown policy components {sorted(unknown)}")
        default = Uniform(0.0, 1.0)
        self.priors = [theta_priors.get(n, default) for n in self.names]
        self._sites = [(addr("edge", i), Bernoulli(e.open_prob))
                       for i, e in enumerate(instance.edges)]

    def prior(self, rng):
        return ThetaVector.from_prior(self.names, self.priors, rng)

    def theta(self, values) -> ThetaVector:
        return ThetaVector(self.names, values, self.priors)

    def weather(self, tracer: Tracer) -> list:
        return [tracer.sample(a, p) for a, p in self._sites]

    def distance(self, theta, weather) -> float | None:
        values = theta.values if isinstance(theta, ThetaVector) else theta
        return dfs_distance(self.instance, weather, values, self._adj, self._param_index)

    def run(self, theta, tracer):
        d = self.distance(theta, self.weather(tracer))
        return self.bounds.lower if d is None else -d


def random_agent_distance(instance: CtpInstance, weather, rng: np.random.Generator,
                          adj=None) -> float:
    """DFS with a uniformly random edge order at every node."""
    if adj is None:
        adj = instance.incident()
    n_params = sum(len(a) for a in adj)
    d = dfs_distance(instance, weather, rng.random(n_params), adj)
    if d is None:
        raise ValueError("goal unreachable under this weather; filter to connected weathers")
    return d


def triangle_instance(open_probs=(0.6, 0.8, 0.8)) -> CtpInstance:
    """start 0, detour 1, goal 2; edges 0-2 (3), 0-1 (1), 1-2 (1)."""
    p0, p1, p2 = open_probs
    return CtpInstance(3, (Edge(0, 2, 3.0, p0), Edge(0, 1, 1.0, p1), Edge(1, 2, 1.0, p2)), 0, 2)


def triangle_toy_priors(levels=(0.25, 0.75)) -> dict:
    """Discrete priors for the only decision (edge order at the start node);
    every other weight is a point mass."""
    inst = triangle_instance()
    priors = {n: point_mass(0.5) for n in policy_names(inst)}
    priors["w0_e0"] = Categorical(tuple(levels))
    priors["w0_e1"] = Categorical(tuple(levels))
    return priors


def generate_instance(nodes: int = 20, edges: int = 46, seed: int = 0,
                      open_prob: float = 0.5, scale: float = 100.0) -> CtpInstance:
    """Seeded random geometric graph.

    Nodes are uniform in a square; a Euclidean minimum spanning tree makes
    the graph connected and the shortest remaining pairs are added until
    ``edges`` edges exist.  Start and goal are the leftmost and rightmost
    nodes.
    """
    max_edges = nodes * (nodes - 1) // 2
    if not nodes - 1 <= edges <= max_edges:
        raise ValueError(f"need {nodes - 1} <= edges <= {max_edges}")
    rng = np.random.default_rng(seed)
    xy = rng.random((nodes, 2)) * scale
    pairs = sorted((float(np.hypot(*(xy[i] - xy[j]))), i, j)
                   for i in range(nodes) for j in range(i + 1, nodes))
    parent = list(range(nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chosen, rest = [], []
    for d, i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((d, i, j))
        else:
            rest.append((d, i, j))
    chosen += rest[:edges - len(chosen)]
    chosen.sort(key=lambda t: (t[1], t[2]))
    start = int(np.argmin(xy[:, 0]))
    goal = int(np.argmax(xy[:, 0]))
    return CtpInstance(
        nodes, tuple(Edge(i, j, round(d, 6), open_prob) for d, i, j in chosen), start, goal,
        tuple((round(float(x), 6), round(float(y), 6)) for x, y in xy))
