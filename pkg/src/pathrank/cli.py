"""``pathrank`` command line: one subcommand per pipeline step.

Every command resolves its configuration (defaults < ``--config`` file <
``PATHRANK_<KEY>`` environment < flags), checks its input files before doing
any work, writes only its declared outputs and then a JSON run manifest
recording the resolved configuration and the SHA-256 of every input and
output.  ``pathrank replay MANIFEST`` reruns a command from its manifest and
fails unless the outputs are byte-identical.

Errors are reported as a single line ``error: <category>: <detail>``.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

from . import __version__
from .config import KEYS, RunConfig, read_config_file, resolve
from .data import read_instances, read_trajectories, write_instances, write_trajectories
from .data import make_synthetic_trajectories
from .errors import ConfigError, InputMissingError, PathRankError, ReplayMismatchError
from .embedding import loads_embedding
from .metrics import Report
from .model import (checkpoint_bytes, config_dict, load_checkpoint, predict_and_rank,
                    training_log_lines)
from .network import CostKind, dumps_network, generate_grid_network, loads_network
from .pipeline import (SPLIT_NAMES, build_dataset, candidate_sets, embed_text, evaluate_all,
                       fit_model, needs_embedding, strategy_from, train_config)
from .routing import (DiversifiedParams, diversified_top_k, multi_cost_diversified, read_paths,
                      top_k, validate_path, write_paths)

log = logging.getLogger("pathrank")

Outputs = dict  # path -> bytes


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _network(cfg: RunConfig):
    return loads_network(_read_text(cfg.network))


def _trajectories(path: str, network):
    with open(path, encoding="utf-8") as f:
        return read_trajectories(f, network)


def _text(write: Callable, items) -> bytes:
    buf = io.StringIO()
    write(items, buf)
    return buf.getvalue().encode()


def _split_path(cfg: RunConfig, split: str, ext: str) -> str:
    return os.path.join(cfg.data_dir, f"{split}.{ext}")


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    keys: tuple
    inputs: Callable[[RunConfig], list]
    outputs: Callable[[RunConfig], list]
    run: Callable[[RunConfig, int], Outputs]


# ---------------------------------------------------------------- commands

def run_gen_network(cfg: RunConfig, jobs: int) -> Outputs:
    net = generate_grid_network(cfg.rows, cfg.cols, cfg.network_seed)
    return {cfg.network: dumps_network(net).encode()}


def run_gen_trajectories(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    trajs = make_synthetic_trajectories(net, cfg.trajectory_count, CostKind.parse(cfg.preference),
                                        cfg.trajectory_seed, cfg.noise, cfg.min_hops)
    return {cfg.trajectories: _text(write_trajectories, trajs)}


def run_paths(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    kind = CostKind.parse(cfg.cost)
    params = DiversifiedParams(cfg.k, cfg.delta, max(cfg.max_candidates, cfg.k))
    if cfg.path_strategy == "topk":
        paths = top_k(net, cfg.source, cfg.dest, kind, cfg.k)
    elif cfg.path_strategy == "diversified":
        paths = diversified_top_k(net, cfg.source, cfg.dest, kind, params)
    elif cfg.path_strategy == "multicost":
        paths = multi_cost_diversified(net, cfg.source, cfg.dest, params)
    else:
        raise ConfigError(f"path_strategy must be topk, diversified or multicost, got {cfg.path_strategy!r}")
    return {cfg.paths_out: _text(write_paths, paths)}


def run_gen_data(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    trajs = _trajectories(cfg.trajectories, net)
    split = build_dataset(net, trajs, cfg, jobs=jobs)
    out = {}
    for name in SPLIT_NAMES:
        out[_split_path(cfg, name, "traj")] = _text(write_trajectories, split.trajectories[name])
        out[_split_path(cfg, name, "inst")] = _text(write_instances, split.instances[name])
    log.info("instances: %s", {k: len(v) for k, v in split.instances.items()})
    return out


def run_embed(cfg: RunConfig, jobs: int) -> Outputs:
    return {cfg.embedding: embed_text(_network(cfg), cfg, jobs=jobs).encode()}


def run_train(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    sets = {}
    for name in ("train", "val"):
        with open(_split_path(cfg, name, "inst"), encoding="utf-8") as f:
            sets[name] = read_instances(f)
    emb = loads_embedding(_read_text(cfg.embedding)) if needs_embedding(cfg) else None
    config = train_config(cfg, dim=None if emb is None else emb.shape[1])
    result = fit_model(sets["train"], sets["val"], config, net.vertex_count, emb)
    extra = {"train_config": config_dict(config), "best_epoch": result.best_epoch}
    return {cfg.checkpoint: checkpoint_bytes(result.params, extra),
            cfg.training_log: ("\n".join(training_log_lines(result)) + "\n").encode()}


def _load_params(path: str):
    with open(path, "rb") as f:
        return load_checkpoint(f)


def run_rank(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    params = _load_params(cfg.checkpoint)
    with open(cfg.candidates, encoding="utf-8") as f:
        cands = [validate_path(net, p) for p in read_paths(f)]
    lines = [f"{score!r} " + " ".join(map(str, path)) for path, score in predict_and_rank(params, cands)]
    return {cfg.ranking: ("\n".join(lines) + "\n" if lines else "").encode()}


def _reports_text(reports: Sequence[Report]) -> tuple[bytes, bytes]:
    table = "\n\n".join(r.table() for r in reports) + "\n"
    lines = []
    for r in reports:
        lines.append(f"# {r.name}")
        lines.extend(r.lines())
    return table.encode(), ("\n".join(lines) + "\n").encode()


def run_evaluate(cfg: RunConfig, jobs: int) -> Outputs:
    net = _network(cfg)
    trajs = _trajectories(_split_path(cfg, "test", "traj"), net)
    params = _load_params(cfg.checkpoint) if cfg.checkpoint else None
    reports = evaluate_all(net, trajs, candidate_sets(net, trajs, cfg), params)
    table, lines = _reports_text(reports)
    return {cfg.report: table, cfg.report_lines: lines}


SWEEP_HEADER = f"{'strategy':<8}{'M':>6}{'alpha':>7}{'MAE':>10}{'MARE':>10}{'tau':>10}{'rho':>10}"


def sweep_row(strategy: str, dim: int, alpha: float, summary: dict) -> str:
    return (f"{strategy:<8}{dim:>6}{alpha:>7.2f}{summary['mae']:>10.4f}{summary['mare']:>10.4f}"
            f"{summary['tau']:>10.4f}{summary['rho']:>10.4f}")


def run_sweep(cfg: RunConfig, jobs: int) -> Outputs:
    """Train and evaluate one model per (strategy, M, alpha) cell; failures become rows."""
    net = _network(cfg)
    trajs = _trajectories(cfg.trajectories, net)
    try:
        dims = [int(d) for d in cfg.sweep_dims]
        alphas = [float(a) for a in cfg.sweep_alphas]
    except ValueError as exc:
        raise ConfigError(f"bad sweep matrix: {exc}") from None
    embeddings: dict = {}
    rows = [SWEEP_HEADER]
    cands = None
    for strat_name in cfg.sweep_strategies:
        try:
            strategy = strategy_from(cfg, strat_name)
            split = build_dataset(net, trajs, cfg, strategy, jobs)
        except PathRankError as exc:
            rows.append(f"{strat_name:<8} failed: {exc.category}: {exc}")
            continue
        if cands is None:
            cands = candidate_sets(net, split.trajectories["test"], cfg)
        for dim in dims:
            for alpha in alphas:
                try:
                    emb = None
                    if needs_embedding(cfg):
                        if dim not in embeddings:
                            embeddings[dim] = loads_embedding(embed_text(net, cfg, dim, jobs))
                        emb = embeddings[dim]
                    config = train_config(cfg, dim, alpha)
                    result = fit_model(split.instances["train"], split.instances["val"], config,
                                       net.vertex_count, emb)
                    report = evaluate_all(net, split.trajectories["test"], cands, result.params)[0]
                    rows.append(sweep_row(strategy.name, dim, alpha, report.summary()))
                except PathRankError as exc:
                    rows.append(f"{strategy.name:<8}{dim:>6}{alpha:>7.2f} failed: {exc.category}: {exc}")
    return {cfg.sweep_out: ("\n".join(rows) + "\n").encode()}


_WALK = ("walks_per_vertex", "walk_length", "p", "q", "weighted", "walk_seed", "window",
         "negatives", "sg_epochs", "sg_learning_rate", "skipgram_seed")
_TRAIN = ("embedding_mode", "alpha", "aux_tasks", "lam", "learning_rate", "batch_size",
          "max_epoch", "z_max", "gru_bias", "train_seed")
_SPLIT = ("k", "delta", "max_candidates", "val_fraction", "test_fraction", "split_seed")


def _embedding_if_needed(cfg):
    return [cfg.embedding] if needs_embedding(cfg) else []


COMMANDS = {c.name: c for c in [
    Command("gen-network", "generate a synthetic grid road network",
            ("network", "rows", "cols", "network_seed"),
            lambda c: [], lambda c: [c.network], run_gen_network),
    Command("gen-trajectories", "simulate drivers that prefer one cost",
            ("network", "trajectories", "trajectory_count", "preference", "noise", "min_hops",
             "trajectory_seed"),
            lambda c: [c.network], lambda c: [c.trajectories], run_gen_trajectories),
    Command("paths", "compute top-k, diversified or multi-cost paths",
            ("network", "paths_out", "source", "dest", "cost", "path_strategy", "k", "delta",
             "max_candidates"),
            lambda c: [c.network], lambda c: [c.paths_out], run_paths),
    Command("gen-data", "split trajectories and label competitive paths",
            ("network", "trajectories", "data_dir", "strategy") + _SPLIT,
            lambda c: [c.network, c.trajectories],
            lambda c: [_split_path(c, s, e) for s in SPLIT_NAMES for e in ("traj", "inst")],
            run_gen_data),
    Command("embed", "learn node2vec vertex embeddings",
            ("network", "embedding", "dim") + _WALK,
            lambda c: [c.network], lambda c: [c.embedding], run_embed),
    Command("train", "train the path ranking model",
            ("network", "data_dir", "embedding", "checkpoint", "training_log", "dim") + _TRAIN,
            lambda c: [c.network, _split_path(c, "train", "inst"), _split_path(c, "val", "inst")]
            + _embedding_if_needed(c),
            lambda c: [c.checkpoint, c.training_log], run_train),
    Command("rank", "score and order candidate paths",
            ("network", "checkpoint", "candidates", "ranking"),
            lambda c: [c.network, c.checkpoint, c.candidates], lambda c: [c.ranking], run_rank),
    Command("evaluate", "compare model and cost baselines on the test split",
            ("network", "data_dir", "checkpoint", "report", "report_lines", "k", "delta",
             "max_candidates"),
            lambda c: [c.network, _split_path(c, "test", "traj")] + ([c.checkpoint] if c.checkpoint else []),
            lambda c: [c.report, c.report_lines], run_evaluate),
    Command("sweep", "train and evaluate over strategies x M x alpha",
            ("network", "trajectories", "sweep_out", "sweep_strategies", "sweep_dims",
             "sweep_alphas", "strategy") + _SPLIT + _WALK + _TRAIN + ("dim",),
            lambda c: [c.network, c.trajectories], lambda c: [c.sweep_out], run_sweep),
]}


# ---------------------------------------------------------------- plumbing

def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _check_paths(inputs: list, outputs: list) -> None:
    for path in inputs:
        if not os.path.isfile(path):
            raise InputMissingError(f"input file not found: {path}")
    clash = {os.path.realpath(p) for p in inputs} & {os.path.realpath(p) for p in outputs}
    if clash:
        raise ConfigError(f"output would overwrite an input: {sorted(clash)[0]}")
    if len({os.path.realpath(p) for p in outputs}) != len(outputs):
        raise ConfigError("two outputs share one path")


def manifest_path(cfg: RunConfig, outputs: list) -> str:
    return cfg.manifest or outputs[0] + ".manifest.json"


def execute(command: Command, cfg: RunConfig, argv: Sequence[str], jobs: int = 1) -> dict:
    """Run ``command``, write its outputs and manifest; returns the manifest."""
    inputs, outputs = command.inputs(cfg), command.outputs(cfg)
    _check_paths(inputs, outputs)
    in_digests = {p: file_digest(p) for p in inputs}
    produced = command.run(cfg, jobs)
    if list(produced) != outputs:
        raise AssertionError(f"{command.name} produced {list(produced)}, declared {outputs}")
    for path, blob in produced.items():
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "wb") as f:
            f.write(blob)
    manifest = {
        "tool": "pathrank",
        "version": __version__,
        "command": command.name,
        "argv": list(argv),
        "config": cfg.to_json(),
        "config_sha256": cfg.digest(),
        "seeds": {k: v for k, v in cfg.to_json().items() if k.endswith("seed")},
        "inputs": in_digests,
        "outputs": {p: hashlib.sha256(b).hexdigest() for p, b in produced.items()},
    }
    with open(manifest_path(cfg, outputs), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def replay(path: str, jobs: int = 1) -> dict:
    """Rerun a manifest's command with its recorded configuration and verify the outputs."""
    try:
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise InputMissingError(f"manifest not found: {path}") from None
    except ValueError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from None
    command = COMMANDS.get(manifest.get("command"))
    if command is None:
        raise ConfigError(f"manifest names unknown command {manifest.get('command')!r}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in manifest["config"].items()}
    cfg = RunConfig(values)
    if cfg.digest() != manifest["config_sha256"]:
        raise ReplayMismatchError("manifest config does not match its recorded hash")
    for p, digest in manifest["inputs"].items():
        if not os.path.isfile(p):
            raise InputMissingError(f"input file not found: {p}")
        if file_digest(p) != digest:
            raise ReplayMismatchError(f"input {p} changed since the recorded run")
    again = execute(command, cfg, manifest["argv"], jobs)
    differing = [p for p, d in manifest["outputs"].items() if again["outputs"].get(p) != d]
    if differing:
        raise ReplayMismatchError(f"outputs differ from the recorded run: {', '.join(differing)}")
    return again


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage.error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathrank", description="Learn to rank candidate paths in a road network.")
    parser.add_argument("--version", action="version", version=f"pathrank {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command in COMMANDS.values():
        sp = subs.add_parser(command.name, help=command.help, description=command.help)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (outputs do not depend on it)")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
        for name in command.keys + ("manifest",):
            key = KEYS[name]
            default = ",".join(key.default) if isinstance(key.default, tuple) else key.default
            sp.add_argument(key.flag, dest=name, metavar=name.upper(),
                            help=f"{key.help} (default: {default!r})")
    rp = subs.add_parser("replay", help="rerun a command from its manifest and verify outputs")
    rp.add_argument("manifest_file", metavar="MANIFEST")
    rp.add_argument("--jobs", type=int, default=1)
    rp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.command == "replay":
            manifest = replay(args.manifest_file, args.jobs)
        else:
            command = COMMANDS[args.command]
            file_values = {}
            if args.config:
                if not os.path.isfile(args.config):
                    raise InputMissingError(f"config file not found: {args.config}")
                with open(args.config, encoding="utf-8") as f:
                    file_values = read_config_file(f, args.config)
            flags = {name: getattr(args, name) for name in command.keys + ("manifest",)}
            cfg = resolve(command.keys + ("manifest",), file_values, os.environ, flags)
            manifest = execute(command, cfg, argv, args.jobs)
    except PathRankError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io.missing: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io.error: {exc}", file=sys.stderr)
        return 1
    for path in manifest["outputs"]:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
