#!/usr/bin/env python3
"""
🕸️ GRAPH TOPOLOGY 🕸️
Time-varying directed communication graphs for distributed averaging.

Provides:
- GraphSnapshot: one round's edge set, self-edges always present
- TopologySequence: deterministic round index -> snapshot map with window length B
- Static, periodic and seeded random sequences (with connectivity repair)
- Checkers for B-connectivity and the cut-crossing condition
- JSON load/save for snapshots and snapshot sequences

Edges are stored as (j, i) pairs meaning "i receives from j"; nodes are 0-based.
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

RNG_ALGORITHMS = ("PCG64", "MT19937", "Philox", "SFC64")


class AvgnetError(ValueError):
    """Base error for all averaging-network failures"""


class TopologyRangeError(AvgnetError):
    """Requested round lies beyond the sequence horizon"""


def make_rng(seed: int, *keys: int, algorithm: str = "PCG64") -> np.random.Generator:
    """
    Build a numpy Generator from a named bit generator.

    Extra keys (e.g. the round index) are mixed into the seed sequence so
    that every (seed, key) pair has its own reproducible stream.
    """
    if algorithm not in RNG_ALGORITHMS:
        raise AvgnetError(f"Unknown PRNG algorithm '{algorithm}', expected one of {RNG_ALGORITHMS}")
    bit_generator = getattr(np.random, algorithm)
    return np.random.Generator(bit_generator(np.random.SeedSequence([int(seed), *map(int, keys)])))


def sorted_order(x: Sequence[float]) -> np.ndarray:
    """Node indices sorted by value, nonincreasing; ties by ascending index"""
    values = np.asarray(x, dtype=float)
    return np.argsort(-values, kind="stable")


class RoundCache:
    """Keeps the most recent rounds only; older rounds are rebuilt on demand"""

    def __init__(self, capacity: int):
        self.capacity = max(1, capacity)
        self._items: Dict[int, Any] = {}

    def get_or_build(self, k: int, build: Callable[[int], Any]) -> Any:
        if k not in self._items:
            self._items[k] = build(k)
            if len(self._items) > self.capacity:
                self._items.pop(next(iter(self._items)))
        return self._items[k]


@dataclass(frozen=True)
class GraphSnapshot:
    """Directed graph of a single round; (j, i) means i receives from j"""
    n: int
    edges: FrozenSet[Edge]

    def __post_init__(self):
        if self.n < 1:
            raise AvgnetError(f"Graph needs at least one node, got n={self.n}")

        edges = set()
        for j, i in self.edges:
            j, i = int(j), int(i)
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise AvgnetError(f"Edge ({j}, {i}) has an endpoint outside 0..{self.n - 1}")
            edges.add((j, i))
        edges.update((i, i) for i in range(self.n))
        object.__setattr__(self, "edges", frozenset(edges))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge], undirected: bool = False) -> "GraphSnapshot":
        """Build a snapshot, optionally adding every reverse edge"""
        edge_set = set(map(tuple, edges))
        if undirected:
            edge_set |= {(i, j) for j, i in edge_set}
        return cls(n, frozenset(edge_set))

    @classmethod
    def from_matrix(cls, entries: np.ndarray) -> "GraphSnapshot":
        """Edge set E(A) = {(j, i) | a_ij > 0}"""
        rows, cols = np.nonzero(np.asarray(entries) > 0)
        return cls(int(np.asarray(entries).shape[0]), frozenset(zip(cols.tolist(), rows.tolist())))

    @classmethod
    def complete(cls, n: int) -> "GraphSnapshot":
        return cls(n, frozenset((j, i) for j in range(n) for i in range(n)))

    @classmethod
    def path(cls, n: int) -> "GraphSnapshot":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)], undirected=True)

    @classmethod
    def cycle(cls, n: int) -> "GraphSnapshot":
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)], undirected=True)

    @classmethod
    def star(cls, n: int, center: int = 0) -> "GraphSnapshot":
        return cls.from_edges(n, [(center, i) for i in range(n) if i != center], undirected=True)

    @cached_property
    def cross_edges(self) -> np.ndarray:
        """Non-self edges as an (m, 2) integer array of (j, i) rows"""
        pairs = sorted((j, i) for j, i in self.edges if j != i)
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """In-neighbors of every node, self excluded, ascending"""
        lists: List[List[int]] = [[] for _ in range(self.n)]
        for j, i in self.cross_edges.tolist():
            lists[i].append(j)
        return tuple(tuple(sorted(nbrs)) for nbrs in lists)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def is_undirected(self) -> bool:
        return all((i, j) in self.edges for j, i in self.edges)

    def union(self, other: "GraphSnapshot") -> "GraphSnapshot":
        if other.n != self.n:
            raise AvgnetError(f"Cannot unite graphs of sizes {self.n} and {other.n}")
        return GraphSnapshot(self.n, self.edges | other.edges)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def to_dict(self) -> Dict[str, Any]:
        """JSON form; self-edges are implicit and left out"""
        return {"n": self.n, "edges": [list(edge) for edge in self.cross_edges.tolist()]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GraphSnapshot":
        try:
            return cls(int(data["n"]), frozenset(tuple(edge) for edge in data.get("edges", [])))
        except (KeyError, TypeError) as e:
            raise AvgnetError(f"Malformed graph snapshot: {e}") from e


class TopologySequence(ABC):
    """
    Deterministic map from round index k to a GraphSnapshot.

    Windows are the round blocks kB..(k+1)B-1. A horizon, when set, is the
    largest round the sequence provides.
    """

    is_weighted = False

    def __init__(self, n: int, window: int, horizon: Optional[int] = None):
        if window < 1:
            raise AvgnetError(f"Window length B must be positive, got {window}")
        if horizon is not None and horizon < 0:
            raise AvgnetError(f"Horizon must be nonnegative, got {horizon}")
        self.n = n
        self.window = window
        self.horizon = horizon

    def snapshot(self, k: int) -> GraphSnapshot:
        self._check_round(k)
        return self._snapshot(k)

    def matrix(self, k: int):
        raise AvgnetError(f"{type(self).__name__} carries graphs only, no weight matrices")

    def window_rounds(self, index: int) -> range:
        return range(index * self.window, (index + 1) * self.window)

    def _check_round(self, k: int):
        if k < 0:
            raise TopologyRangeError(f"Round {k} is negative")
        if self.horizon is not None and k > self.horizon:
            raise TopologyRangeError(f"Round {k} exceeds horizon {self.horizon}")

    @abstractmethod
    def _snapshot(self, k: int) -> GraphSnapshot:
        """Snapshot for an in-range round"""


class PeriodicTopology(TopologySequence):
    """Round-robin over a fixed list of snapshots"""

    def __init__(self, snapshots: Sequence[GraphSnapshot], window: int = 1, horizon: Optional[int] = None):
        if not snapshots:
            raise AvgnetError("Periodic topology needs at least one snapshot")
        sizes = {g.n for g in snapshots}
        if len(sizes) != 1:
            raise AvgnetError(f"Snapshots disagree on node count: {sorted(sizes)}")
        super().__init__(snapshots[0].n, window, horizon)
        self.snapshots = tuple(snapshots)

    def _snapshot(self, k: int) -> GraphSnapshot:
        return self.snapshots[k % len(self.snapshots)]

    def to_dict(self) -> Dict[str, Any]:
        return {"B": self.window, "snapshots": [g.to_dict() for g in self.snapshots]}


class StaticTopology(PeriodicTopology):
    """The same snapshot every round"""

    def __init__(self, snapshot: GraphSnapshot, window: int = 1, horizon: Optional[int] = None):
        super().__init__([snapshot], window, horizon)


class RandomGraphTopology(TopologySequence):
    """
    Seeded random undirected graphs, one per round.

    Round k draws from its own (seed, k) stream, so snapshots do not depend
    on access order. At the last round of each window the components of
    the window union are chained together, making every window union
    connected.
    """

    MODELS = ("erdos_renyi", "geometric")

    def __init__(self, n: int, seed: int, window: int = 1, model: str = "erdos_renyi",
                 p: float = 0.1, radius: float = 0.3, repair: bool = True,
                 algorithm: str = "PCG64", horizon: Optional[int] = None):
        super().__init__(n, window, horizon)
        if model not in self.MODELS:
            raise AvgnetError(f"Unknown random graph model '{model}', expected one of {self.MODELS}")
        if not 0.0 <= p <= 1.0:
            raise AvgnetError(f"Edge probability must lie in [0, 1], got {p}")
        if radius < 0:
            raise AvgnetError(f"Radius must be nonnegative, got {radius}")
        self.seed = seed
        self.model = model
        self.p = p
        self.radius = radius
        self.repair = repair
        self.algorithm = algorithm
        self._cache = RoundCache(2 * window + 2)

    def _draw(self, k: int) -> GraphSnapshot:
        rng = make_rng(self.seed, k, algorithm=self.algorithm)
        nx_seed = int(rng.integers(2**31 - 1))
        if self.model == "erdos_renyi":
            graph = nx.gnp_random_graph(self.n, self.p, seed=nx_seed)
        else:
            graph = nx.random_geometric_graph(self.n, self.radius, seed=nx_seed)
        return GraphSnapshot.from_edges(self.n, graph.edges(), undirected=True)

    def _repaired(self, k: int, drawn: GraphSnapshot) -> GraphSnapshot:
        start = k - self.window + 1
        union = drawn
        for t in range(start, k):
            union = union.union(self._snapshot(t))

        undirected = nx.Graph()
        undirected.add_nodes_from(range(self.n))
        undirected.add_edges_from(union.cross_edges.tolist())
        components = sorted(min(c) for c in nx.connected_components(undirected))
        if len(components) == 1:
            return drawn

        bridges = list(zip(components, components[1:]))
        logger.debug(f"Round {k}: linking {len(components)} window components")
        return GraphSnapshot.from_edges(self.n, list(drawn.edges) + bridges, undirected=True)

    def _build(self, k: int) -> GraphSnapshot:
        drawn = self._draw(k)
        if self.repair and k % self.window == self.window - 1:
            drawn = self._repaired(k, drawn)
        return drawn

    def _snapshot(self, k: int) -> GraphSnapshot:
        return self._cache.get_or_build(k, self._build)


def is_strongly_connected(g: GraphSnapshot) -> bool:
    """True iff every node reaches every other node along directed edges"""
    return g.n == 1 or nx.is_strongly_connected(g.to_networkx())


def union_graph(seq: TopologySequence, k_start: int, k_end: int) -> GraphSnapshot:
    """Union of the edge sets of rounds k_start..k_end inclusive"""
    if k_start > k_end:
        raise AvgnetError(f"Empty round range {k_start}..{k_end}")
    edges = set()
    for k in range(k_start, k_end + 1):
        edges |= seq.snapshot(k).edges
    return GraphSnapshot(seq.n, frozenset(edges))


def check_b_connectivity(seq: TopologySequence, num_windows: int) -> bool:
    """Every window union over the first num_windows windows is strongly connected"""
    if num_windows < 1:
        raise AvgnetError(f"Need at least one window, got {num_windows}")
    for index in range(num_windows):
        rounds = seq.window_rounds(index)
        if not is_strongly_connected(union_graph(seq, rounds.start, rounds.stop - 1)):
            logger.debug(f"Window {index} union is not strongly connected")
            return False
    return True


def cut_assumption_holds(snapshots: Iterable[GraphSnapshot], x: Sequence[float]) -> bool:
    """
    Cut-crossing condition for one window of snapshots.

    With nodes sorted nonincreasingly by x, every cut between sorted
    positions d and d+1 whose values differ must be crossed (in either
    direction) by an edge of some snapshot.
    """
    values = np.asarray(x, dtype=float)
    n = values.size
    if n < 2:
        return True

    order = sorted_order(values)
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)

    coverage = np.zeros(n, dtype=np.int64)
    for g in snapshots:
        if g.n != n:
            raise AvgnetError(f"Snapshot has {g.n} nodes but x has {n} entries")
        if g.cross_edges.size == 0:
            continue
        ends = position[g.cross_edges]
        lo, hi = ends.min(axis=1), ends.max(axis=1)
        np.add.at(coverage, lo, 1)
        np.add.at(coverage, hi, -1)

    crossed = np.cumsum(coverage)[:-1] > 0
    sorted_values = values[order]
    exempt = sorted_values[:-1] == sorted_values[1:]
    return bool(np.all(crossed | exempt))


def check_cut_assumption(seq: TopologySequence, window_index: int, x_at_window_start: Sequence[float]) -> bool:
    """Cut-crossing condition over the rounds of window `window_index`"""
    if len(x_at_window_start) != seq.n:
        raise AvgnetError(f"x has {len(x_at_window_start)} entries, sequence has {seq.n} nodes")
    snapshots = [seq.snapshot(k) for k in seq.window_rounds(window_index)]
    return cut_assumption_holds(snapshots, x_at_window_start)


def load_sequence(path: Union[str, Path]) -> PeriodicTopology:
    """Read {"B": int, "snapshots": [...]} (a bare snapshot is a static sequence)"""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if "snapshots" not in data:
        return StaticTopology(GraphSnapshot.from_dict(data), window=int(data.get("B", 1)))
    snapshots = [GraphSnapshot.from_dict(item) for item in data["snapshots"]]
    return PeriodicTopology(snapshots, window=int(data.get("B", 1)))


def save_sequence(seq: PeriodicTopology, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(seq.to_dict(), f, indent=2)
    logger.info(f"💾 Saved {len(seq.snapshots)} snapshots to {path}")
    return path
