"""Flat ``key = value`` run configuration shared by every CLI command.

Values are resolved in increasing precedence: built-in defaults, the config
file, ``PATHRANK_<KEY>`` environment variables, then command-line flags.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, TextIO

from .errors import ConfigError, ParseError

ENV_PREFIX = "PATHRANK_"


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_list(text: str) -> tuple:
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


_KEYS = [
    # files
    Key("network", str, "network.txt", "road network file"),
    Key("trajectories", str, "trajectories.txt", "trajectory file"),
    Key("data_dir", str, "data", "directory for split trajectories and instances"),
    Key("embedding", str, "embedding.txt", "vertex embedding file"),
    Key("checkpoint", str, "model.ckpt", "model checkpoint file"),
    Key("training_log", str, "train_log.csv", "per-epoch training log"),
    Key("candidates", str, "candidates.txt", "candidate path file to rank"),
    Key("ranking", str, "ranking.txt", "ranked output file"),
    Key("paths_out", str, "paths.txt", "output path file of the paths command"),
    Key("report", str, "report.txt", "evaluation report (table)"),
    Key("report_lines", str, "report.csv", "evaluation report (metric,bucket,value)"),
    Key("sweep_out", str, "sweep.txt", "sweep results table"),
    Key("manifest", str, "", "run manifest path (default: <first output>.manifest.json)"),
    # network
    Key("rows", int, 10, "grid rows"),
    Key("cols", int, 10, "grid columns"),
    Key("network_seed", int, 0, "grid cost seed"),
    # synthetic trajectories
    Key("trajectory_count", int, 300, "number of synthetic trajectories"),
    Key("preference", str, "travel_time", "cost the synthetic driver minimizes"),
    Key("noise", float, 0.2, "probability of taking the second-best path"),
    Key("min_hops", int, 3, "minimum hop distance between source and destination"),
    Key("trajectory_seed", int, 0, "synthetic driver seed"),
    # routing
    Key("source", int, 0, "source vertex"),
    Key("dest", int, 1, "destination vertex"),
    Key("cost", str, "distance", "cost kind: distance, travel_time or fuel"),
    Key("path_strategy", str, "diversified", "topk, diversified or multicost"),
    Key("k", int, 3, "paths per cost kind"),
    Key("delta", float, 0.8, "similarity threshold"),
    Key("max_candidates", int, 1000, "cap on paths examined by diversification"),
    # training data
    Key("strategy", str, "D-TkM", "training data strategy"),
    Key("val_fraction", float, 0.1, "validation share of trajectories"),
    Key("test_fraction", float, 0.2, "test share of trajectories"),
    Key("split_seed", int, 0, "train/val/test shuffle seed"),
    # embedding
    Key("dim", int, 128, "embedding size M"),
    Key("walks_per_vertex", int, 10, "random walks started per vertex"),
    Key("walk_length", int, 80, "vertices per walk"),
    Key("p", float, 1.0, "return parameter"),
    Key("q", float, 1.0, "in-out parameter"),
    Key("weighted", parse_bool, False, "bias walks towards short edges"),
    Key("walk_seed", int, 0, "walk seed"),
    Key("window", int, 10, "skip-gram context window"),
    Key("negatives", int, 5, "negative samples per positive pair"),
    Key("sg_epochs", int, 5, "skip-gram epochs"),
    Key("sg_learning_rate", float, 0.025, "skip-gram initial learning rate"),
    Key("skipgram_seed", int, 0, "skip-gram seed"),
    # model
    Key("embedding_mode", str, "pretrained_trainable", "random (PR-B), pretrained_frozen (PR-A1), "
                                                        "pretrained_trainable (PR-A2)"),
    Key("alpha", float, 0.0, "multi-task weight"),
    Key("aux_tasks", int, 0, "auxiliary cost heads m (0-3)"),
    Key("lam", float, 1e-4, "L2 regularization weight"),
    Key("learning_rate", float, 1e-3, "Adam learning rate"),
    Key("batch_size", int, 32, "mini-batch size"),
    Key("max_epoch", int, 50, "training epochs"),
    Key("z_max", int, 250, "longest supported path (GRU positions)"),
    Key("gru_bias", parse_bool, False, "add bias vectors to the GRU gates"),
    Key("train_seed", int, 0, "model initialization and batching seed"),
    # sweep
    Key("sweep_strategies", parse_list, ("D-TkM",), "comma-separated strategies"),
    Key("sweep_dims", parse_list, ("128",), "comma-separated embedding sizes"),
    Key("sweep_alphas", parse_list, ("0.0",), "comma-separated alpha values"),
]

KEYS: dict[str, Key] = {k.name: k for k in _KEYS}


def _convert(key: Key, raw: Any, origin: str) -> Any:
    if not isinstance(raw, str):
        return raw
    try:
        return key.parse(raw)
    except ValueError as exc:
        raise ConfigError(f"{origin}: bad value for {key.name}: {exc}") from None


def read_config_file(stream: TextIO, origin: str = "config") -> dict[str, str]:
    """Raw ``key = value`` pairs; unknown keys and malformed lines are rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{origin}: line {lineno}: expected 'key = value'")
        name, value = (s.strip() for s in line.split("=", 1))
        if name not in KEYS:
            raise ConfigError(f"{origin}: line {lineno}: unknown key {name!r}")
        out[name] = value
    return out


class RunConfig(Mapping):
    """Resolved values for a chosen subset of keys."""

    def __init__(self, values: Mapping[str, Any]):
        self._values = dict(values)

    def __getitem__(self, name: str) -> Any:
        return self._values[name]

    def __getattr__(self, name: str) -> Any:
        try:
            return self._values[name]
        except KeyError:
            raise AttributeError(name) from None

    def __iter__(self):
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self._values.items())}

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def resolve(names: Iterable[str], file_values: Mapping[str, str] | None = None,
            env: Mapping[str, str] | None = None,
            flags: Mapping[str, Any] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    file_values = file_values or {}
    flags = flags or {}
    values = {}
    for name in names:
        key = KEYS[name]
        value = key.default
        if name in file_values:
            value = _convert(key, file_values[name], "config file")
        env_name = ENV_PREFIX + name.upper()
        if env_name in env:
            value = _convert(key, env[env_name], env_name)
        if flags.get(name) is not None:
            value = _convert(key, flags[name], key.flag)
        values[name] = value
    return RunConfig(values)
