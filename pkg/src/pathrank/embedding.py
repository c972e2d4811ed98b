"""node2vec vertex embeddings: biased random walks plus skip-gram with negative sampling.

Embeddings are plain ``(N, M)`` float64 arrays, row ``v`` for vertex ``v``.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import kernels
from .errors import ParseError, ValidationError
from .network import RoadNetwork

DEFAULT_DIM = 128
WALK_CHUNK = 256


@dataclass(frozen=True)
class WalkConfig:
    walks_per_vertex: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    weighted: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_vertex < 1 or self.walk_length < 1:
            raise ValidationError("walks_per_vertex and walk_length must be positive")
        if not (self.p > 0 and self.q > 0):
            raise ValidationError("p and q must be positive")


@dataclass(frozen=True)
class SkipGramConfig:
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.window < 1 or self.negatives < 1 or self.epochs < 0:
            raise ValidationError("window and negatives must be positive, epochs non-negative")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")


def transition_weights(network: RoadNetwork, weighted: bool) -> np.ndarray:
    """Per-edge affinity: inverse distance (scaled so the shortest edge is 1) or 1."""
    if not weighted or network.edge_count == 0:
        return np.ones(network.edge_count)
    dist = network.costs[:, 0]
    return np.ascontiguousarray(dist.min() / dist)


def _walk_uniforms(seed: int, starts: np.ndarray, rounds: np.ndarray, steps: int) -> np.ndarray:
    out = np.empty((len(starts), steps))
    for i, (v, r) in enumerate(zip(starts, rounds)):
        out[i] = np.random.default_rng([seed, int(v), int(r)]).random(steps)
    return out


def _walk_block(network, weights, config, starts, rounds):
    uniforms = _walk_uniforms(config.seed, starts, rounds, config.walk_length - 1)
    return kernels.node2vec_walks(network.indptr, network.indices, weights,
                                  np.ascontiguousarray(starts, dtype=np.int64), uniforms,
                                  1.0 / config.p, 1.0 / config.q)


def walk_matrix(network: RoadNetwork, config: WalkConfig, jobs: int = 1) -> np.ndarray:
    """Walks as a ``(walks_per_vertex * N, walk_length)`` array padded with -1.

    Row order is round-major; each walk draws from its own generator seeded
    by (seed, start vertex, round), so the result does not depend on ``jobs``.
    """
    if network.vertex_count == 0:
        raise ValidationError("cannot walk an empty network")
    n = network.vertex_count
    starts = np.tile(np.arange(n, dtype=np.int64), config.walks_per_vertex)
    rounds = np.repeat(np.arange(config.walks_per_vertex, dtype=np.int64), n)
    weights = transition_weights(network, config.weighted)
    if jobs <= 1:
        return _walk_block(network, weights, config, starts, rounds)
    blocks = np.array_split(np.arange(len(starts)), jobs)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(_walk_block, [network] * jobs, [weights] * jobs, [config] * jobs,
                         [starts[b] for b in blocks], [rounds[b] for b in blocks])
        return np.vstack(list(parts))


def generate_walks(network: RoadNetwork, config: WalkConfig, jobs: int = 1) -> list[list[int]]:
    mat = walk_matrix(network, config, jobs)
    return [row[row >= 0].tolist() for row in mat]


def _as_matrix(walks) -> np.ndarray:
    if isinstance(walks, np.ndarray):
        return np.ascontiguousarray(walks, dtype=np.int64)
    width = max((len(w) for w in walks), default=0)
    mat = np.full((len(walks), width), -1, dtype=np.int64)
    for i, w in enumerate(walks):
        mat[i, :len(w)] = w
    return mat


def noise_distribution(walks: np.ndarray, vertex_count: int, power: float = 0.75) -> np.ndarray:
    counts = np.bincount(walks[walks >= 0], minlength=vertex_count).astype(np.float64)
    weights = counts ** power
    return weights / weights.sum()


def init_embedding(vertex_count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(vertex_count, dim))


def train_skipgram(walks, vertex_count: int, dim: int = DEFAULT_DIM,
                   config: SkipGramConfig = SkipGramConfig()) -> np.ndarray:
    """Skip-gram with negative sampling over the walk corpus.

    Returns the input-vector matrix; the context matrix is discarded.
    """
    if dim <= 0:
        raise ValidationError(f"embedding dimension must be positive, got {dim}")
    mat = _as_matrix(walks)
    if mat.size == 0 or not (mat >= 0).any():
        raise ValidationError("walk corpus is empty")
    if mat.max() >= vertex_count:
        raise ValidationError("walk mentions a vertex outside [0, vertex_count)")
    rng = np.random.default_rng(config.seed)
    syn0 = init_embedding(vertex_count, dim, rng)
    syn1 = np.zeros((vertex_count, dim))
    if config.epochs == 0:
        return syn0
    probs = noise_distribution(mat, vertex_count)
    chunks = [mat[i:i + WALK_CHUNK] for i in range(0, len(mat), WALK_CHUNK)]
    chunk_pairs = [kernels.count_pairs(c, config.window) for c in chunks]
    total = sum(chunk_pairs) * config.epochs
    if total == 0:
        return syn0
    lr0 = config.learning_rate
    done = 0
    for _ in range(config.epochs):
        for chunk, n_pairs in zip(chunks, chunk_pairs):
            negatives = rng.choice(vertex_count, size=(n_pairs, config.negatives), p=probs)
            done += kernels.sgns_epoch(syn0, syn1, chunk, negatives, config.window,
                                       lr0, lr0 * 1e-4, done, total)
    return syn0


def node2vec(network: RoadNetwork, dim: int = DEFAULT_DIM, walk: WalkConfig = WalkConfig(),
             skipgram: SkipGramConfig = SkipGramConfig(), jobs: int = 1) -> np.ndarray:
    return train_skipgram(walk_matrix(network, walk, jobs), network.vertex_count, dim, skipgram)


def cosine_matrix(emb: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    unit = emb / np.where(norms == 0, 1.0, norms)
    return unit @ unit.T


def save_embedding(emb: np.ndarray, stream: TextIO) -> None:
    n, m = emb.shape
    stream.write(f"{n} {m}\n")
    for v in range(n):
        stream.write(str(v) + " " + " ".join(f"{x:.9g}" for x in emb[v]) + "\n")


def load_embedding(stream: TextIO) -> np.ndarray:
    header = None
    emb = None
    filled = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if header is None:
            try:
                n, m = (int(x) for x in fields)
            except ValueError:
                raise ParseError(f"line {lineno}: expected header 'N M'") from None
            if n < 0 or m <= 0:
                raise ParseError(f"line {lineno}: bad dimensions {n} x {m}")
            header = (n, m)
            emb = np.zeros((n, m))
            filled = np.zeros(n, dtype=bool)
            continue
        n, m = header
        if len(fields) != m + 1:
            raise ParseError(f"line {lineno}: expected vertex id and {m} values")
        try:
            v = int(fields[0])
            values = [float(x) for x in fields[1:]]
        except ValueError:
            raise ParseError(f"line {lineno}: malformed row") from None
        if not 0 <= v < n:
            raise ParseError(f"line {lineno}: vertex {v} outside header size {n}")
        if filled[v]:
            raise ParseError(f"line {lineno}: duplicate row for vertex {v}")
        emb[v] = values
        filled[v] = True
    if header is None:
        raise ParseError("empty embedding file")
    if not filled.all():
        raise ParseError(f"embedding file has {int(filled.sum())} rows, header says {header[0]}")
    if not np.isfinite(emb).all():
        raise ParseError("embedding contains non-finite values")
    return emb


def dumps_embedding(emb: np.ndarray) -> str:
    buf = io.StringIO()
    save_embedding(emb, buf)
    return buf.getvalue()


def loads_embedding(text: str) -> np.ndarray:
    return load_embedding(io.StringIO(text))
