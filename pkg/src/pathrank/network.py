"""Weighted directed road network with distance, travel-time and fuel costs."""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ParseError, ValidationError

MAX_GRID_VERTICES = 100_000


class CostKind(enum.Enum):
    DISTANCE = "distance"
    TRAVEL_TIME = "travel_time"
    FUEL = "fuel"

    @classmethod
    def parse(cls, name: str | CostKind) -> CostKind:
        if isinstance(name, CostKind):
            return name
        aliases = {"di": "distance", "dist": "distance", "tt": "travel_time",
                   "time": "travel_time", "fc": "fuel"}
        key = name.strip().lower().replace("-", "_")
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown cost kind {name!r}") from None

    @property
    def column(self) -> int:
        return _COLUMNS[self]


_COLUMNS = {CostKind.DISTANCE: 0, CostKind.TRAVEL_TIME: 1, CostKind.FUEL: 2}
COST_KINDS = (CostKind.DISTANCE, CostKind.TRAVEL_TIME, CostKind.FUEL)


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    distance: float
    travel_time: float
    fuel: float

    def cost(self, kind: CostKind) -> float:
        return (self.distance, self.travel_time, self.fuel)[kind.column]


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    """Immutable directed graph G = (V, E, D, T, F) in CSR layout.

    Outgoing edges of vertex ``u`` occupy ``indptr[u]:indptr[u + 1]`` and are
    sorted by target id.  ``costs[e]`` holds (distance, travel_time, fuel).
    """

    vertex_count: int
    indptr: np.ndarray
    indices: np.ndarray
    costs: np.ndarray
    _edge_index: dict = field(repr=False)

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[Edge]) -> RoadNetwork:
        if vertex_count < 0:
            raise ValidationError("vertex count must be non-negative")
        edges = list(edges)
        seen = set()
        for e in edges:
            _validate_edge(e, vertex_count)
            key = (e.source, e.target)
            if key in seen:
                raise ValidationError(f"duplicate edge {e.source}->{e.target}")
            seen.add(key)
        edges.sort(key=lambda e: (e.source, e.target))
        indptr = np.zeros(vertex_count + 1, dtype=np.int64)
        for e in edges:
            indptr[e.source + 1] += 1
        np.cumsum(indptr, out=indptr)
        indices = np.array([e.target for e in edges], dtype=np.int64)
        costs = np.array([[e.distance, e.travel_time, e.fuel] for e in edges],
                         dtype=np.float64).reshape(len(edges), 3)
        edge_index = {(e.source, e.target): i for i, e in enumerate(edges)}
        for arr in (indptr, indices, costs):
            arr.setflags(write=False)
        return cls(vertex_count, indptr, indices, costs, edge_index)

    @property
    def edge_count(self) -> int:
        return len(self.indices)

    def edges(self) -> list[Edge]:
        out = []
        for u in range(self.vertex_count):
            for e in range(self.indptr[u], self.indptr[u + 1]):
                d, t, f = self.costs[e]
                out.append(Edge(u, int(self.indices[e]), float(d), float(t), float(f)))
        return out

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self._edge_index[(u, v)]
        except KeyError:
            raise ValidationError(f"no edge {u}->{v}") from None

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_index

    def edge(self, u: int, v: int) -> Edge:
        d, t, f = self.costs[self.edge_id(u, v)]
        return Edge(u, v, float(d), float(t), float(f))

    def cost(self, u: int, v: int, kind: CostKind) -> float:
        return float(self.costs[self.edge_id(u, v), kind.column])

    def check_vertex(self, v: int) -> None:
        if not 0 <= v < self.vertex_count:
            raise ValidationError(f"vertex {v} out of range [0, {self.vertex_count})")

    def path_cost(self, path: Sequence[int], kind: CostKind) -> float:
        return path_cost(self, path, kind)


def _validate_edge(e: Edge, n: int) -> None:
    for v in (e.source, e.target):
        if not 0 <= v < n:
            raise ValidationError(f"edge endpoint {v} out of range [0, {n})")
    if e.source == e.target:
        raise ValidationError(f"self-loop at vertex {e.source}")
    for name in ("distance", "travel_time", "fuel"):
        value = getattr(e, name)
        if not (value > 0 and np.isfinite(value)):
            raise ValidationError(
                f"non-positive {name} {value} on edge {e.source}->{e.target}")


def path_cost(network: RoadNetwork, path: Sequence[int], kind: CostKind) -> float:
    """Sum of the selected cost over consecutive edges, left to right."""
    if len(path) < 2:
        raise ValidationError("a path needs at least two vertices")
    col = kind.column
    total = 0.0
    for u, v in zip(path[:-1], path[1:]):
        total += float(network.costs[network.edge_id(u, v), col])
    return total


def path_costs(network: RoadNetwork, path: Sequence[int]) -> tuple[float, float, float]:
    return tuple(path_cost(network, path, k) for k in COST_KINDS)


def load_network(stream: TextIO) -> RoadNetwork:
    """Parse the edge-list format: a vertex-count header then
    ``from to distance_m travel_time_s fuel_ml`` per line."""
    vertex_count = None
    edges = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if vertex_count is None:
            if len(fields) != 1:
                raise ParseError(f"line {lineno}: expected vertex count header")
            try:
                vertex_count = int(fields[0])
            except ValueError:
                raise ParseError(f"line {lineno}: bad vertex count {fields[0]!r}") from None
            continue
        if len(fields) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        try:
            u, v = int(fields[0]), int(fields[1])
            d, t, f = (float(x) for x in fields[2:])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed edge {line!r}") from None
        edge = Edge(u, v, d, t, f)
        try:
            _validate_edge(edge, vertex_count)
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        edges.append(edge)
    if vertex_count is None:
        raise ParseError("empty network file")
    return RoadNetwork.from_edges(vertex_count, edges)


def loads_network(text: str) -> RoadNetwork:
    return load_network(io.StringIO(text))


def save_network(network: RoadNetwork, stream: TextIO) -> None:
    stream.write(f"{network.vertex_count}\n")
    for e in network.edges():
        stream.write(f"{e.source} {e.target} {e.distance!r} {e.travel_time!r} {e.fuel!r}\n")


def dumps_network(network: RoadNetwork) -> str:
    buf = io.StringIO()
    save_network(network, buf)
    return buf.getvalue()


def fuel_rate(speed: float) -> float:
    """Fuel use in mL per metre; slower roads burn more per metre."""
    return 0.06 + 0.04 / (speed / SPEED_RANGE[1])


DISTANCE_RANGE = (50.0, 500.0)
SPEED_RANGE = (8.0, 25.0)


def grid_edge_samples(rows: int, cols: int, seed: int) -> list[tuple[int, int, float, float]]:
    """(u, v, distance, speed) for each directed lattice edge, in generation order."""
    rng = np.random.default_rng(seed)
    pairs = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                pairs.append((u, u + 1))
            if r + 1 < rows:
                pairs.append((u, u + cols))
    out = []
    for u, v in pairs:
        for a, b in ((u, v), (v, u)):
            dist = float(rng.uniform(*DISTANCE_RANGE))
            speed = float(rng.uniform(*SPEED_RANGE))
            out.append((a, b, dist, speed))
    return out


def generate_grid_network(rows: int, cols: int, seed: int = 0) -> RoadNetwork:
    """Lattice with a pair of opposed directed edges between neighbours."""
    if rows < 2 or cols < 2:
        raise ValidationError("grid needs at least 2 rows and 2 columns")
    if rows * cols > MAX_GRID_VERTICES:
        raise ValidationError(f"grid of {rows * cols} vertices exceeds {MAX_GRID_VERTICES}")
    edges = [Edge(u, v, dist, dist / speed, dist * fuel_rate(speed))
             for u, v, dist, speed in grid_edge_samples(rows, cols, seed)]
    return RoadNetwork.from_edges(rows * cols, edges)
