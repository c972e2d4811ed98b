"""Competitive-path training sets built from trajectory paths."""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Sequence, TextIO

import numpy as np

from .errors import NoPathError, ParseError, ValidationError
from .network import COST_KINDS, CostKind, RoadNetwork, path_costs
from .routing import (DEFAULT_MAX_CANDIDATES, DiversifiedParams, dijkstra,
                      diversified_top_k, multi_cost_diversified, top_k,
                      validate_path, weighted_jaccard, yen_next_shortest)

log = logging.getLogger(__name__)

DRIVER_POOL = ("driver0", "driver1", "driver2", "driver3", "driver4")
SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


@dataclass(frozen=True)
class Trajectory:
    driver: str
    path: tuple

    @property
    def source(self) -> int:
        return self.path[0]

    @property
    def dest(self) -> int:
        return self.path[-1]


@dataclass(frozen=True)
class TrainingInstance:
    path: tuple
    label: float
    aux: tuple  # raw (distance, travel_time, fuel) of ``path``


class StrategyKind(enum.Enum):
    TKDI = "TkDI"
    TKTT = "TkTT"
    TKFC = "TkFC"
    DTKDI = "DTkDI"
    DTKTT = "DTkTT"
    DTKFC = "DTkFC"
    DTKM = "DTkM"

    @property
    def diversified(self) -> bool:
        return self.value.startswith("D")

    @property
    def cost(self) -> CostKind | None:
        return {"DI": CostKind.DISTANCE, "TT": CostKind.TRAVEL_TIME,
                "FC": CostKind.FUEL}.get(self.value[-2:])


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    k: int = 3
    delta: float = 0.8
    max_candidates: int = DEFAULT_MAX_CANDIDATES

    @classmethod
    def parse(cls, name: str, k: int = 3, delta: float = 0.8,
              max_candidates: int = DEFAULT_MAX_CANDIDATES) -> Strategy:
        key = name.replace("-", "").replace("_", "").lower()
        for kind in StrategyKind:
            if kind.value.lower() == key:
                return cls(kind, k, delta, max_candidates)
        raise ValidationError(f"unknown strategy {name!r}")

    @property
    def name(self) -> str:
        return self.kind.value

    def params(self) -> DiversifiedParams:
        return DiversifiedParams(self.k, self.delta, max(self.max_candidates, self.k))


ALL_STRATEGIES = tuple(StrategyKind)


class InstanceList(list):
    """List of instances; ``warning`` is set when the strategy found no path."""

    warning: str | None = None


def competitive_paths(network: RoadNetwork, source: int, dest: int,
                      strategy: Strategy) -> list[tuple]:
    kind = strategy.kind
    if kind is StrategyKind.DTKM:
        return multi_cost_diversified(network, source, dest, strategy.params())
    if kind.diversified:
        return diversified_top_k(network, source, dest, kind.cost, strategy.params())
    return top_k(network, source, dest, kind.cost, strategy.k)


def generate_instances(network: RoadNetwork, trajectory: Trajectory,
                       strategy: Strategy) -> InstanceList:
    """Label every competitive path by its similarity to the trajectory path."""
    out = InstanceList()
    try:
        paths = competitive_paths(network, trajectory.source, trajectory.dest, strategy)
    except NoPathError as exc:
        out.warning = str(exc)
        log.warning("%s: %s", strategy.name, exc)
        return out
    for p in paths:
        out.append(TrainingInstance(p, weighted_jaccard(network, trajectory.path, p),
                                    path_costs(network, p)))
    return out


def generate_all(network: RoadNetwork, trajectories: Sequence[Trajectory],
                 strategy: Strategy, jobs: int = 1) -> list[InstanceList]:
    """Instances per trajectory, in input order."""
    work = partial(generate_instances, network, strategy=strategy)
    if jobs <= 1 or len(trajectories) < 2:
        return [work(t) for t in trajectories]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, trajectories, chunksize=8))


def pooled_candidates(network: RoadNetwork, trajectory: Trajectory,
                      strategies: Sequence[Strategy]) -> list[TrainingInstance]:
    """Deduplicated union of the candidates produced by several strategies."""
    seen = set()
    out = []
    for strategy in strategies:
        for inst in generate_instances(network, trajectory, strategy):
            if inst.path not in seen:
                seen.add(inst.path)
                out.append(inst)
    return out


def split_dataset(groups: Sequence, fractions: Sequence[float] = SPLIT_FRACTIONS,
                  seed: int = 0) -> tuple[list, list, list]:
    """Shuffle whole groups (one per trajectory) into train/val/test.

    Validation and test sizes are floored; the remainder goes to training.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValidationError(f"split fractions must be 3 non-negatives summing to 1: {fractions}")
    n = len(groups)
    if n < 3:
        raise ValidationError(f"need at least 3 trajectories to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_val = math.floor(n * fractions[1] + 1e-9)
    n_test = math.floor(n * fractions[2] + 1e-9)
    n_train = n - n_val - n_test
    shuffled = [groups[i] for i in order]
    return (shuffled[:n_train], shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


@dataclass(frozen=True)
class AuxNormalizer:
    mean: tuple
    std: tuple

    def apply(self, aux: Sequence[float]) -> tuple:
        return tuple((a - m) / s for a, m, s in zip(aux, self.mean, self.std))

    def invert(self, z: Sequence[float]) -> tuple:
        return tuple(v * s + m for v, m, s in zip(z, self.mean, self.std))


def fit_aux_normalizer(instances: Sequence[TrainingInstance]) -> AuxNormalizer:
    """Per-cost mean and population std; a zero std is replaced by 1."""
    if not instances:
        raise ValidationError("cannot fit the aux normalizer on an empty training set")
    aux = np.array([inst.aux for inst in instances], dtype=np.float64)
    mean = aux.mean(axis=0)
    std = aux.std(axis=0)
    std[std == 0] = 1.0
    return AuxNormalizer(tuple(float(x) for x in mean), tuple(float(x) for x in std))


def apply_aux_normalizer(instance: TrainingInstance, normalizer: AuxNormalizer) -> tuple:
    return normalizer.apply(instance.aux)


def _hop_distances(network: RoadNetwork, source: int) -> np.ndarray:
    hops = np.full(network.vertex_count, -1, dtype=np.int64)
    hops[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in network.neighbors(u):
            if hops[v] < 0:
                hops[v] = hops[u] + 1
                queue.append(int(v))
    return hops


def make_synthetic_trajectories(network: RoadNetwork, count: int,
                                preference: CostKind = CostKind.TRAVEL_TIME,
                                noise_seed: int = 0, noise: float = 0.2,
                                min_hops: int = 3,
                                drivers: Sequence[str] = DRIVER_POOL) -> list[Trajectory]:
    """Drivers who take the cheapest path under ``preference``, except that
    with probability ``noise`` they take the second cheapest one."""
    if count < 1:
        raise ValidationError("count must be at least 1")
    rng = np.random.default_rng(noise_seed)
    hop_cache: dict[int, np.ndarray] = {}
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValidationError(f"could not find pairs {min_hops}+ hops apart")
        s, d = (int(x) for x in rng.integers(0, network.vertex_count, size=2))
        take_second = bool(rng.random() < noise)
        if s == d:
            continue
        if s not in hop_cache:
            hop_cache[s] = _hop_distances(network, s)
        if hop_cache[s][d] < min_hops:
            continue
        path = dijkstra(network, s, d, preference)
        if take_second:
            stream = yen_next_shortest(network, s, d, preference)
            next(stream)
            path = next(stream, path)
        out.append(Trajectory(drivers[len(out) % len(drivers)], path))
    return out


def read_trajectories(stream: TextIO, network: RoadNetwork | None = None) -> list[Trajectory]:
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            path = tuple(int(v) for v in fields[1:])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed vertex id in {line!r}") from None
        if len(path) < 2:
            raise ParseError(f"line {lineno}: trajectory needs at least two vertices")
        if network is not None:
            try:
                path = validate_path(network, path)
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        out.append(Trajectory(fields[0], path))
    return out


def write_trajectories(trajectories: Sequence[Trajectory], stream: TextIO) -> None:
    for t in trajectories:
        stream.write(t.driver + " " + " ".join(str(v) for v in t.path) + "\n")


def read_instances(stream: TextIO) -> list[TrainingInstance]:
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 6:
            raise ParseError(f"line {lineno}: expected label, 3 costs and >= 2 vertices")
        try:
            label = float(fields[0])
            aux = tuple(float(x) for x in fields[1:4])
            path = tuple(int(v) for v in fields[4:])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed instance {line!r}") from None
        if not 0.0 <= label <= 1.0:
            raise ValidationError(f"line {lineno}: label {label} outside [0, 1]")
        out.append(TrainingInstance(path, label, aux))
    return out


def write_instances(instances: Sequence[TrainingInstance], stream: TextIO) -> None:
    for inst in instances:
        head = " ".join(repr(float(x)) for x in (inst.label, *inst.aux))
        stream.write(head + " " + " ".join(str(v) for v in inst.path) + "\n")


def label_spread(instances: Sequence[TrainingInstance]) -> float:
    labels = [inst.label for inst in instances]
    return max(labels) - min(labels) if labels else 0.0


__all__ = [
    "Trajectory", "TrainingInstance", "Strategy", "StrategyKind", "ALL_STRATEGIES",
    "InstanceList", "AuxNormalizer", "competitive_paths", "generate_instances",
    "generate_all", "pooled_candidates", "split_dataset", "fit_aux_normalizer",
    "apply_aux_normalizer", "make_synthetic_trajectories", "read_trajectories",
    "write_trajectories", "read_instances", "write_instances", "label_spread",
    "COST_KINDS",
]
