"""Shortest paths, Yen's k-shortest enumeration, diversified top-k and path similarity."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import NoPathError, ValidationError
from .network import COST_KINDS, CostKind, RoadNetwork, path_cost

log = logging.getLogger(__name__)

Path = tuple  # tuple[int, ...] of vertex ids

DEFAULT_MAX_CANDIDATES = 1000


def validate_path(network: RoadNetwork, path: Sequence[int]) -> Path:
    """Return ``path`` as a tuple after checking edges and simplicity."""
    path = tuple(int(v) for v in path)
    if len(path) < 2:
        raise ValidationError("a path needs at least two vertices")
    for v in path:
        network.check_vertex(v)
    if len(set(path)) != len(path):
        raise ValidationError(f"path revisits a vertex: {path}")
    for u, v in zip(path[:-1], path[1:]):
        if not network.has_edge(u, v):
            raise ValidationError(f"path uses non-edge {u}->{v}")
    return path


def _check_query(network: RoadNetwork, source: int, dest: int) -> None:
    network.check_vertex(source)
    network.check_vertex(dest)
    if source == dest:
        raise ValidationError("source and destination must differ")


def _weights(network: RoadNetwork, kind: CostKind) -> np.ndarray:
    return np.ascontiguousarray(network.costs[:, kind.column])


def dijkstra(network: RoadNetwork, source: int, dest: int,
             kind: CostKind = CostKind.DISTANCE) -> Path | None:
    """Least-cost path, ties resolved to the lexicographically smallest sequence."""
    _check_query(network, source, dest)
    found = kernels.spur_dijkstra(
        network.indptr, network.indices, _weights(network, kind), source, dest, 0.0,
        np.zeros(network.vertex_count, dtype=np.uint8),
        np.zeros(network.edge_count, dtype=np.uint8))
    return None if found is None else tuple(found)


def yen_next_shortest(network: RoadNetwork, source: int, dest: int,
                      kind: CostKind = CostKind.DISTANCE) -> Iterator[Path]:
    """Lazily yield loopless paths in (cost, vertex sequence) order.

    Yen's algorithm with Lawler's refinement: spurs of a path are only taken
    from the vertex where it deviated from its parent onwards.
    """
    _check_query(network, source, dest)
    return _yen(network, source, dest, kind)


def _yen(network, source, dest, kind):
    weights = _weights(network, kind)
    col = kind.column
    blocked_vertex = np.zeros(network.vertex_count, dtype=np.uint8)
    blocked_edge = np.zeros(network.edge_count, dtype=np.uint8)
    first = kernels.spur_dijkstra(network.indptr, network.indices, weights,
                                  source, dest, 0.0, blocked_vertex, blocked_edge)
    if first is None:
        return
    first = tuple(first)
    heap = [(path_cost(network, first, kind), first, 0)]
    seen = {first}
    next_after_root: dict[tuple, set] = {}
    while heap:
        _, path, deviation = heapq.heappop(heap)
        yield path
        for i in range(len(path) - 1):
            next_after_root.setdefault(path[:i + 1], set()).add(path[i + 1])
        root_cost = 0.0
        for i in range(len(path) - 1):
            if i >= deviation:
                root = path[:i + 1]
                spur_vertex = path[i]
                for v in root[:-1]:
                    blocked_vertex[v] = 1
                edge_ids = [network.edge_id(spur_vertex, v) for v in next_after_root[root]]
                blocked_edge[edge_ids] = 1
                spur = kernels.spur_dijkstra(network.indptr, network.indices, weights,
                                             spur_vertex, dest, root_cost,
                                             blocked_vertex, blocked_edge)
                blocked_vertex[list(root[:-1])] = 0
                blocked_edge[edge_ids] = 0
                if spur is not None:
                    candidate = root[:-1] + tuple(spur)
                    if candidate not in seen:
                        seen.add(candidate)
                        heapq.heappush(heap, (path_cost(network, candidate, kind), candidate, i))
            root_cost += float(network.costs[network.edge_id(path[i], path[i + 1]), col])


def top_k(network: RoadNetwork, source: int, dest: int, kind: CostKind, k: int) -> list[Path]:
    """The k cheapest loopless paths (fewer if the graph has fewer)."""
    out = []
    for path in yen_next_shortest(network, source, dest, kind):
        if len(out) >= k:
            break
        out.append(path)
    if not out:
        raise NoPathError(f"no path from {source} to {dest}")
    return out


def _edge_key_distances(network: RoadNetwork, path: Sequence[int]) -> dict:
    return {(u, v): float(network.costs[network.edge_id(u, v), 0])
            for u, v in zip(path[:-1], path[1:])}


def weighted_jaccard(network: RoadNetwork, p1: Sequence[int], p2: Sequence[int]) -> float:
    """Distance-weighted Jaccard similarity of the directed edge sets of two paths."""
    e1 = _edge_key_distances(network, p1)
    e2 = _edge_key_distances(network, p2)
    if not e1 or not e2:
        raise ValidationError("a path needs at least two vertices")
    union = {**e1, **e2}
    # sorted summation keeps the value exactly symmetric
    shared = sum(union[key] for key in sorted(e1.keys() & e2.keys()))
    total = sum(union[key] for key in sorted(union))
    return shared / total


@dataclass(frozen=True)
class DiversifiedParams:
    k: int = 3
    delta: float = 0.8
    max_candidates: int = DEFAULT_MAX_CANDIDATES

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be at least 1")
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if self.max_candidates < self.k:
            raise ValidationError("max_candidates must be at least k")


@dataclass
class DiversifiedResult:
    paths: list
    examined: int
    capped: bool


def diversify(network: RoadNetwork, stream, params: DiversifiedParams) -> DiversifiedResult:
    """Greedy filter over a cost-ordered path stream.

    A candidate is kept only when its similarity to every kept path is below
    ``delta``.  Stops at k kept paths, stream exhaustion or the candidate cap.
    """
    kept: list = []
    examined = 0
    capped = False
    stream = iter(stream)
    while len(kept) < params.k:
        if examined >= params.max_candidates:
            capped = True
            break
        path = next(stream, None)
        if path is None:
            break
        examined += 1
        if all(weighted_jaccard(network, path, other) < params.delta for other in kept):
            kept.append(path)
    return DiversifiedResult(kept, examined, capped)


def diversified_top_k(network: RoadNetwork, source: int, dest: int, kind: CostKind,
                      params: DiversifiedParams) -> list[Path]:
    result = diversify(network, yen_next_shortest(network, source, dest, kind), params)
    if not result.paths:
        raise NoPathError(f"no path from {source} to {dest}")
    if result.capped:
        log.warning("diversified top-k %d->%d (%s): candidate cap %d hit with %d/%d paths",
                    source, dest, kind.value, params.max_candidates,
                    len(result.paths), params.k)
    return result.paths


def multi_cost_diversified(network: RoadNetwork, source: int, dest: int,
                           params: DiversifiedParams) -> list[Path]:
    """Union of the per-cost diversified sets, first occurrence order."""
    out: list = []
    seen = set()
    for kind in COST_KINDS:
        for path in diversified_top_k(network, source, dest, kind, params):
            if path not in seen:
                seen.add(path)
                out.append(path)
    return out


def read_paths(stream) -> list[Path]:
    out = []
    for raw in stream:
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(tuple(int(x) for x in line.split()))
    return out


def write_paths(paths, stream) -> None:
    for p in paths:
        stream.write(" ".join(str(v) for v in p) + "\n")
