"""End-to-end steps shared by the CLI commands and the sweep.

Each step takes plain objects and a resolved :class:`RunConfig`, so a sweep
cell performs exactly the computation of the corresponding standalone
commands, including the text round trip of the embedding file.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import RunConfig
from .data import (ALL_STRATEGIES, Strategy, TrainingInstance, Trajectory, fit_aux_normalizer,
                   generate_all, pooled_candidates, split_dataset)
from .embedding import SkipGramConfig, WalkConfig, loads_embedding, dumps_embedding, node2vec
from .errors import ConfigError
from .metrics import Report, baseline_scorer, evaluate
from .model import EmbeddingMode, ModelParams, TrainConfig, TrainResult, predict, train
from .network import COST_KINDS, RoadNetwork

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class DataSplit:
    trajectories: dict  # split name -> list[Trajectory]
    instances: dict     # split name -> list[TrainingInstance]


def strategy_from(cfg: RunConfig, name: str | None = None) -> Strategy:
    return Strategy.parse(name or cfg.strategy, cfg.k, cfg.delta, cfg.max_candidates)


def build_dataset(network: RoadNetwork, trajectories: Sequence[Trajectory], cfg: RunConfig,
                  strategy: Strategy | None = None, jobs: int = 1) -> DataSplit:
    """Split trajectories, then label every competitive path of each one."""
    strategy = strategy or strategy_from(cfg)
    fractions = (1.0 - cfg.val_fraction - cfg.test_fraction, cfg.val_fraction, cfg.test_fraction)
    idx = split_dataset(list(range(len(trajectories))), fractions, cfg.split_seed)
    per_traj = generate_all(network, trajectories, strategy, jobs)
    trajs, insts = {}, {}
    for name, part in zip(SPLIT_NAMES, idx):
        trajs[name] = [trajectories[i] for i in part]
        insts[name] = [inst for i in part for inst in per_traj[i]]
    return DataSplit(trajs, insts)


def walk_config(cfg: RunConfig) -> WalkConfig:
    return WalkConfig(cfg.walks_per_vertex, cfg.walk_length, cfg.p, cfg.q, cfg.weighted, cfg.walk_seed)


def skipgram_config(cfg: RunConfig) -> SkipGramConfig:
    return SkipGramConfig(cfg.window, cfg.negatives, cfg.sg_epochs, cfg.sg_learning_rate,
                          cfg.skipgram_seed)


def embed_text(network: RoadNetwork, cfg: RunConfig, dim: int | None = None, jobs: int = 1) -> str:
    """Embedding file contents, as written by the ``embed`` command."""
    emb = node2vec(network, dim or cfg.dim, walk_config(cfg), skipgram_config(cfg), jobs)
    return dumps_embedding(emb)


def train_config(cfg: RunConfig, dim: int | None = None, alpha: float | None = None) -> TrainConfig:
    alpha = cfg.alpha if alpha is None else alpha
    if alpha > 0 and cfg.aux_tasks == 0:
        raise ConfigError("alpha > 0 needs aux_tasks >= 1")
    return TrainConfig(alpha=alpha, lam=cfg.lam, learning_rate=cfg.learning_rate,
                       batch_size=cfg.batch_size, max_epoch=cfg.max_epoch, z_max=cfg.z_max,
                       embedding_mode=EmbeddingMode.parse(cfg.embedding_mode),
                       aux_tasks=cfg.aux_tasks, dim=dim or cfg.dim, gru_bias=cfg.gru_bias,
                       seed=cfg.train_seed)


def needs_embedding(cfg: RunConfig) -> bool:
    return EmbeddingMode.parse(cfg.embedding_mode) is not EmbeddingMode.RANDOM


def fit_model(train_set: Sequence[TrainingInstance], val_set: Sequence[TrainingInstance],
              config: TrainConfig, vertex_count: int,
              embedding: np.ndarray | None) -> TrainResult:
    normalizer = fit_aux_normalizer(train_set)
    pretrained = None if config.embedding_mode is EmbeddingMode.RANDOM else embedding
    return train(train_set, val_set, config, vertex_count, pretrained, normalizer)


def candidate_sets(network: RoadNetwork, trajectories: Sequence[Trajectory],
                   cfg: RunConfig) -> list[list[TrainingInstance]]:
    """All-strategy pooled candidates per trajectory (the evaluation protocol)."""
    strategies = [Strategy(kind, cfg.k, cfg.delta, cfg.max_candidates) for kind in ALL_STRATEGIES]
    return [pooled_candidates(network, t, strategies) for t in trajectories]


def evaluate_all(network: RoadNetwork, trajectories: Sequence[Trajectory],
                 cands: Sequence[Sequence[TrainingInstance]],
                 params: ModelParams | None) -> list[Report]:
    """Reports for the model (if given) followed by the three cost baselines."""
    reports = []
    if params is not None:
        reports.append(evaluate(lambda paths: predict(params, paths)[:, 0], network,
                                trajectories, cands, name="PathRank"))
    for kind in COST_KINDS:
        reports.append(evaluate(baseline_scorer(network, kind), network, trajectories, cands,
                                name=f"baseline-{kind.value}", with_scores=False))
    return reports


def round_trip_embedding(text: str) -> np.ndarray:
    return loads_embedding(text)
