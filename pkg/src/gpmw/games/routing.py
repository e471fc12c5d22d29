"""Repeated traffic routing on a road network with BPR edge latencies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from ..gp import ConfigError
from .base import Environment
from .tntp import RoadNetwork

BPR_ALPHA = 0.15
BPR_POWER = 4


def bpr_travel_time(free_flow, capacity, x):
    """Edge travel time ``c_e (1 + 0.15 (x / C_e)^4)``; vectorised."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("edge load must be nonnegative")
    out = free_flow * (1.0 + BPR_ALPHA * (x / capacity) ** BPR_POWER)
    return float(out) if out.ndim == 0 else out


def occupancy(profiles: np.ndarray, agent: int, edges: Sequence[int] | None = None) -> np.ndarray:
    """Load put by every agent except ``agent`` on each edge (optionally restricted to ``edges``)."""
    profiles = np.asarray(profiles, dtype=float)
    psi = profiles.sum(axis=0) - profiles[agent]
    return psi if edges is None else psi[list(edges)]


def agent_travel_time(route, psi, free_flow, capacity) -> float:
    """Demand-weighted travel time ``sum_e a_e t_e(a_e + psi_e)`` over the agent's edges."""
    route = np.asarray(route, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if route.shape != psi.shape:
        raise ValueError("route profile and occupancy must cover the same edges")
    return float(route @ bpr_travel_time(free_flow, capacity, route + psi))


def congestion(profiles: np.ndarray, capacity) -> float:
    """Average over all edges of ``0.15 (total load / C_e)^4``."""
    load = np.asarray(profiles, dtype=float).sum(axis=0)
    return float(np.mean(BPR_ALPHA * (load / np.asarray(capacity, dtype=float)) ** BPR_POWER))


@dataclass
class AgentRoutes:
    origin: int
    destination: int
    demand: float
    routes: list[list[int]]  # edge indices per route, in travel order
    free_flow: list[float]

    @property
    def edges(self) -> list[int]:
        """E(i): every edge any of the agent's routes can use, sorted."""
        return sorted({e for r in self.routes for e in r})

    def incidence(self, n_edges: int) -> np.ndarray:
        inc = np.zeros((len(self.routes), n_edges))
        for k, r in enumerate(self.routes):
            inc[k, r] = 1.0
        return inc

    def profiles(self) -> np.ndarray:
        """Action vectors over E(i): demand on route edges, zero elsewhere."""
        E = self.edges
        col = {e: j for j, e in enumerate(E)}
        out = np.zeros((len(self.routes), len(E)))
        for k, r in enumerate(self.routes):
            out[k, [col[e] for e in r]] = self.demand
        return out


def _graph(network: RoadNetwork) -> nx.DiGraph:
    G = nx.DiGraph()
    for e in range(network.n_edges):
        G.add_edge(int(network.init[e]), int(network.term[e]), weight=float(network.free_flow[e]), index=e)
    return G


def enumerate_routes(network: RoadNetwork, od, K: int = 5, max_ratio: float = 3.0, graph=None) -> AgentRoutes:
    """Up to K loopless shortest paths by free-flow time, dropping any longer than ``max_ratio`` x the shortest."""
    origin, dest, demand = od
    G = graph if graph is not None else _graph(network)
    if origin not in G or dest not in G:
        raise ConfigError(f"OD pair {origin}->{dest} references a node not in the network")
    routes, costs = [], []
    try:
        for path in nx.shortest_simple_paths(G, origin, dest, weight="weight"):
            edges = [G[u][v]["index"] for u, v in zip(path[:-1], path[1:])]
            routes.append(edges)
            costs.append(float(network.free_flow[edges].sum()))
            if len(routes) == K:
                break
    except nx.NetworkXNoPath:
        raise ConfigError(f"no route from {origin} to {dest}") from None
    keep = [k for k, c in enumerate(costs) if c <= max_ratio * costs[0]]
    return AgentRoutes(origin, dest, float(demand), [routes[k] for k in keep], [costs[k] for k in keep])


def enumerate_all(network: RoadNetwork, K: int = 5, max_ratio: float = 3.0) -> list[AgentRoutes]:
    G = _graph(network)
    return [enumerate_routes(network, od, K, max_ratio, graph=G) for od in network.demands]


class RoutingGame(Environment):
    """One agent per OD pair; agent actions are its enumerated routes.

    Learner-scale reward is ``1 - travel_time / bound`` clipped to [0, 1];
    regret is reported in demand-weighted travel time.
    """

    kind = "routing"

    def __init__(self, network: RoadNetwork, agents: list[AgentRoutes], bounds=None, learning=None, normalize=True, noise_fraction=1e-3):
        self.network = network
        self.agents = agents
        self.n_players = len(agents)
        self.normalize = normalize
        E = network.n_edges
        self._inc = [a.incidence(E) for a in agents]
        self._load = [a.demand * inc for a, inc in zip(agents, self._inc)]
        self._edges = [np.array(a.edges, dtype=int) for a in agents]
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float)
        self.noise_fraction = float(noise_fraction)
        learning = sorted(learning) if learning is not None else list(range(self.n_players))
        fixed = sorted(set(range(self.n_players)) - set(learning))
        self.roles = {"learning": learning, "fixed": fixed}
        self._memo: tuple | None = None

    def n_actions(self, i):
        return len(self.agents[i].routes)

    def loads(self, joint) -> np.ndarray:
        key = tuple(int(a) for a in joint)
        if self._memo is None or self._memo[0] != key:
            total = np.zeros(self.network.n_edges)
            for load, a in zip(self._load, key):
                total += load[a]
            self._memo = (key, total)
        return self._memo[1]

    def travel_times(self, i, joint) -> np.ndarray:
        """Travel time of every route of agent ``i`` with the others held at ``joint``."""
        psi = self.loads(joint) - self._load[i][joint[i]]
        own = self._load[i]
        t = bpr_travel_time(self.network.free_flow, self.network.capacity, own + psi[None, :])
        return (own * t).sum(axis=1)

    def counterfactual(self, i, joint):
        return -self.travel_times(i, joint)

    def _scale(self, i, times):
        if self.bounds is None:
            raise ConfigError("reward bounds not set; call scale_rewards first")
        return np.clip(1.0 - times / self.bounds[i], 0.0, 1.0)

    def full_rewards(self, i, joint):
        return self._scale(i, self.travel_times(i, joint))

    def reward(self, i, joint):
        return float(self.full_rewards(i, joint)[joint[i]])

    def context(self, i, joint):
        psi = self.loads(joint) - self._load[i][joint[i]]
        return psi[self._edges[i]]

    def outcomes(self, i):
        E = self._edges[i]
        inc = self._inc[i][:, E]
        own = self._load[i][:, E]
        cap = self.network.capacity[E] if self.normalize else np.ones(len(E))

        def build(psi):
            return np.hstack([inc, (own + np.asarray(psi)[None, :]) / cap])

        return build

    def kernel_blocks(self, i) -> tuple[slice, slice]:
        """Coordinate blocks of a joint outcome: own route incidence, then total load."""
        n = len(self._edges[i])
        return slice(0, n), slice(n, 2 * n)

    def noise_std(self, i):
        return self.noise_fraction

    def congestion(self, joint):
        return float(np.mean(BPR_ALPHA * (self.loads(joint) / self.network.capacity) ** BPR_POWER))

    def shortest(self, i) -> int:
        return int(np.argmin(self.agents[i].free_flow))


def scale_rewards(game: RoutingGame, sample_count: int = 10_000, seed=None, chunk: int = 100) -> np.ndarray:
    """Per-agent travel-time upper bounds: the maximum seen over uniformly random joint outcomes."""
    rng = np.random.default_rng(seed)
    N = game.n_players
    counts = np.array([game.n_actions(i) for i in range(N)])
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    all_loads = np.vstack(game._load)  # (total routes, E)
    ff, cap = game.network.free_flow, game.network.capacity
    bounds = np.zeros(N)
    done = 0
    while done < sample_count:
        n = min(chunk, sample_count - done)
        picks = offsets[None, :] + (rng.random((n, N)) * counts[None, :]).astype(int)
        chosen = all_loads[picks]  # (n, N, E)
        times = ff * (1.0 + BPR_ALPHA * (chosen.sum(axis=1) / cap) ** BPR_POWER)
        per_agent = np.einsum("sne,se->sn", chosen, times)
        bounds = np.maximum(bounds, per_agent.max(axis=0))
        done += n
    return bounds
