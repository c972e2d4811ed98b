"""Bidirectional-GRU path scorer with a multi-output linear head.

A path is embedded row by row from ``B``, zero padded to ``z_max`` positions,
read left-to-right by one GRU and right-to-left by another.  The per-position
states ``[h_j, h'_j]`` are concatenated into one long feature vector ``f`` and
``f @ W_fc`` yields the similarity estimate followed by ``aux_tasks``
reconstructed path costs.  Gradients are computed by hand; the test suite
checks them against central finite differences.
"""

from __future__ import annotations

import enum
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import BinaryIO, Sequence

import numpy as np

from .data import AuxNormalizer, TrainingInstance
from .errors import DivergenceError, ParseError, ValidationError

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PATHRANK-CHECKPOINT\n"
CHECKPOINT_VERSION = 1
GATES = ("r", "z", "h")
DIRECTIONS = ("fwd", "bwd")


class EmbeddingMode(enum.Enum):
    RANDOM = "random"                              # PR-B
    PRETRAINED_FROZEN = "pretrained_frozen"        # PR-A1
    PRETRAINED_TRAINABLE = "pretrained_trainable"  # PR-A2

    @classmethod
    def parse(cls, value: str | EmbeddingMode) -> EmbeddingMode:
        if isinstance(value, EmbeddingMode):
            return value
        aliases = {"pr-b": "random", "prb": "random", "pr-a1": "pretrained_frozen",
                   "pra1": "pretrained_frozen", "frozen": "pretrained_frozen",
                   "pr-a2": "pretrained_trainable", "pra2": "pretrained_trainable",
                   "trainable": "pretrained_trainable"}
        key = value.strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown embedding mode {value!r}") from None


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.0
    lam: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epoch: int = 50
    z_max: int = 250
    embedding_mode: EmbeddingMode = EmbeddingMode.RANDOM
    aux_tasks: int = 0
    dim: int = 128
    gru_bias: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.lam < 0 or self.learning_rate < 0:
            raise ValidationError("lambda and learning_rate must be non-negative")
        if self.batch_size < 1 or self.max_epoch < 0 or self.z_max < 2 or self.dim < 1:
            raise ValidationError("batch_size, z_max, dim must be positive, max_epoch >= 0")
        if self.aux_tasks not in (0, 1, 2, 3):
            raise ValidationError("aux_tasks must be 0, 1, 2 or 3")


@dataclass
class Prediction:
    sim_hat: float
    aux_hat: tuple = ()


@dataclass
class ModelParams:
    """Named parameter tensors plus the metadata needed to reuse them.

    Tensor names: ``B`` (N x M), ``{fwd,bwd}.W_{r,z,h}`` (H x M),
    ``{fwd,bwd}.U_{r,z,h}`` (H x H), optional ``{fwd,bwd}.b_{r,z,h}`` and
    ``W_fc`` (z_max * 2H x 1 + aux_tasks).  H equals M.
    """

    tensors: dict
    z_max: int
    aux_tasks: int = 0
    embedding_mode: EmbeddingMode = EmbeddingMode.RANDOM
    normalizer: AuxNormalizer | None = None

    @property
    def vertex_count(self) -> int:
        return self.tensors["B"].shape[0]

    @property
    def dim(self) -> int:
        return self.tensors["B"].shape[1]

    @property
    def gru_bias(self) -> bool:
        return "fwd.b_r" in self.tensors

    def trainable(self) -> list[str]:
        names = list(self.tensors)
        if self.embedding_mode is EmbeddingMode.PRETRAINED_FROZEN:
            names.remove("B")
        return names

    def copy(self) -> ModelParams:
        return ModelParams({k: v.copy() for k, v in self.tensors.items()},
                           self.z_max, self.aux_tasks, self.embedding_mode, self.normalizer)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def init_params(vertex_count: int, config: TrainConfig,
                pretrained: np.ndarray | None = None,
                rng: np.random.Generator | None = None) -> ModelParams:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    mode = config.embedding_mode
    if mode is EmbeddingMode.RANDOM:
        dim = config.dim
        emb = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vertex_count, dim))
    else:
        if pretrained is None:
            raise ValidationError(f"embedding mode {mode.value} needs a pretrained matrix")
        if pretrained.shape[0] != vertex_count:
            raise ValidationError(
                f"pretrained embedding has {pretrained.shape[0]} rows, network has {vertex_count}")
        emb = np.array(pretrained, dtype=np.float64)
        dim = emb.shape[1]
    tensors = {"B": emb}
    bound = 1.0 / math.sqrt(dim)
    for d in DIRECTIONS:
        for g in GATES:
            tensors[f"{d}.W_{g}"] = rng.uniform(-bound, bound, size=(dim, dim))
        for g in GATES:
            tensors[f"{d}.U_{g}"] = rng.uniform(-bound, bound, size=(dim, dim))
        if config.gru_bias:
            for g in GATES:
                tensors[f"{d}.b_{g}"] = np.zeros(dim)
    fan_in = config.z_max * 2 * dim
    tensors["W_fc"] = rng.uniform(-1.0, 1.0, size=(fan_in, 1 + config.aux_tasks)) / math.sqrt(fan_in)
    return ModelParams(tensors, config.z_max, config.aux_tasks, mode)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_cell(x, h_prev, W_r, W_z, W_h, U_r, U_z, U_h, b_r=None, b_z=None, b_h=None):
    """One GRU step (works on single vectors or row batches)."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape[-1] != W_r.shape[1] or h_prev.shape[-1] != U_r.shape[1]:
        raise ValidationError(
            f"GRU dimension mismatch: x {x.shape}, h {h_prev.shape}, W {W_r.shape}, U {U_r.shape}")
    a_r = x @ W_r.T + h_prev @ U_r.T
    a_z = x @ W_z.T + h_prev @ U_z.T
    if b_r is not None:
        a_r = a_r + b_r
        a_z = a_z + b_z
    r = _sigmoid(a_r)
    z = _sigmoid(a_z)
    a_h = x @ W_h.T + (r * h_prev) @ U_h.T
    if b_h is not None:
        a_h = a_h + b_h
    h_tilde = np.tanh(a_h)
    return z * h_prev + (1.0 - z) * h_tilde


def _encode(params: ModelParams, paths: Sequence[Sequence[int]]):
    z_max = params.z_max
    n, dim = len(paths), params.dim
    x = np.zeros((n, z_max, dim))
    lengths = np.empty(n, dtype=np.int64)
    for i, p in enumerate(paths):
        if len(p) > z_max:
            raise ValidationError(
                f"path of {len(p)} vertices exceeds z_max={z_max}; retrain with a larger z_max")
        if len(p) == 0:
            raise ValidationError("empty path")
        lengths[i] = len(p)
        x[i, :len(p)] = params.tensors["B"][list(p)]
    return x, lengths


def _direction_order(direction: str, z_max: int, active: int, bias: bool) -> list[int]:
    if direction == "fwd":
        return list(range(z_max))
    # right-to-left over zero padding with zero state and no bias stays exactly zero
    start = z_max if bias else active
    return list(range(start - 1, -1, -1))


def _gru_run(params, direction, x, order):
    t = params.tensors
    n, z_max, dim = x.shape
    bias = params.gru_bias
    proj = {}
    flat = x.reshape(n * z_max, dim)
    for g in GATES:
        p = flat @ t[f"{direction}.W_{g}"].T
        if bias:
            p += t[f"{direction}.b_{g}"]
        proj[g] = p.reshape(n, z_max, dim)
    U_r, U_z, U_h = (t[f"{direction}.U_{g}"] for g in GATES)
    states = np.zeros((n, z_max, dim))
    cache = []
    h = np.zeros((n, dim))
    for j in order:
        r = _sigmoid(proj["r"][:, j] + h @ U_r.T)
        z = _sigmoid(proj["z"][:, j] + h @ U_z.T)
        rh = r * h
        h_tilde = np.tanh(proj["h"][:, j] + rh @ U_h.T)
        h_new = z * h + (1.0 - z) * h_tilde
        cache.append((h, r, z, rh, h_tilde))
        states[:, j] = h_new
        h = h_new
    return states, cache


def _gru_backprop(params, direction, x, order, cache, d_states, grads, dx):
    t = params.tensors
    n, z_max, dim = x.shape
    U_r, U_z, U_h = (t[f"{direction}.U_{g}"] for g in GATES)
    da = {g: np.zeros((n, z_max, dim)) for g in GATES}
    dU = {g: np.zeros((dim, dim)) for g in GATES}
    dh_next = np.zeros((n, dim))
    for step in range(len(order) - 1, -1, -1):
        j = order[step]
        h_prev, r, z, rh, h_tilde = cache[step]
        dh = d_states[:, j] + dh_next
        dz = dh * (h_prev - h_tilde)
        dh_prev = dh * z
        da_h = dh * (1.0 - z) * (1.0 - h_tilde * h_tilde)
        dU["h"] += da_h.T @ rh
        drh = da_h @ U_h
        dh_prev += drh * r
        da_r = drh * h_prev * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dU["z"] += da_z.T @ h_prev
        dU["r"] += da_r.T @ h_prev
        dh_prev += da_z @ U_z + da_r @ U_r
        da["h"][:, j] = da_h
        da["z"][:, j] = da_z
        da["r"][:, j] = da_r
        dh_next = dh_prev
    flat_x = x.reshape(n * z_max, dim)
    dflat = dx.reshape(n * z_max, dim)
    for g in GATES:
        da_flat = da[g].reshape(n * z_max, dim)
        grads[f"{direction}.W_{g}"] += da_flat.T @ flat_x
        grads[f"{direction}.U_{g}"] += dU[g]
        dflat += da_flat @ t[f"{direction}.W_{g}"]
        if params.gru_bias:
            grads[f"{direction}.b_{g}"] += da_flat.sum(axis=0)


def forward_batch(params: ModelParams, paths: Sequence[Sequence[int]]):
    """Outputs ``(n, 1 + aux_tasks)`` and the cache needed for gradients."""
    x, lengths = _encode(params, paths)
    n, z_max, dim = x.shape
    active = int(lengths.max())
    feats = np.empty((n, z_max, 2 * dim))
    runs = {}
    for d, sl in zip(DIRECTIONS, (slice(0, dim), slice(dim, 2 * dim))):
        order = _direction_order(d, z_max, active, params.gru_bias)
        states, cache = _gru_run(params, d, x, order)
        feats[:, :, sl] = states
        runs[d] = (order, cache)
    f = feats.reshape(n, z_max * 2 * dim)
    out = f @ params.tensors["W_fc"]
    return out, (paths, x, lengths, f, runs)


def backward_batch(params: ModelParams, d_out: np.ndarray, cache) -> dict:
    """Gradients of the data term for every tensor (B included even when frozen)."""
    paths, x, lengths, f, runs = cache
    n, z_max, dim = x.shape
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    grads["W_fc"] = f.T @ d_out
    d_feats = (d_out @ params.tensors["W_fc"].T).reshape(n, z_max, 2 * dim)
    dx = np.zeros_like(x)
    for d, sl in zip(DIRECTIONS, (slice(0, dim), slice(dim, 2 * dim))):
        order, gru_cache = runs[d]
        _gru_backprop(params, d, x, order, gru_cache, d_feats[:, :, sl], grads, dx)
    rows = np.concatenate([np.asarray(p, dtype=np.int64) for p in paths])
    mask = np.arange(z_max)[None, :] < lengths[:, None]
    np.add.at(grads["B"], rows, dx[mask])
    return grads


def forward(params: ModelParams, path: Sequence[int], z_max: int | None = None):
    """Score one path; returns ``(Prediction, cache)``."""
    if z_max is not None and z_max != params.z_max:
        raise ValidationError(f"model was built for z_max={params.z_max}, got {z_max}")
    out, cache = forward_batch(params, [path])
    row = out[0]
    return Prediction(float(row[0]), tuple(float(v) for v in row[1:])), cache


def regularization(params: ModelParams) -> float:
    return float(sum(np.sum(params.tensors[k] ** 2) for k in params.trainable()))


def loss_basic(sim_hat, sim, params: ModelParams, lam: float) -> float:
    """Mean squared similarity error plus lam times the squared L2 norm."""
    sim_hat = np.asarray(sim_hat, dtype=np.float64)
    sim = np.asarray(sim, dtype=np.float64)
    return float(np.mean((sim_hat - sim) ** 2)) + lam * regularization(params)


def loss_multitask(sim_hat, sim, aux_hat, aux, params: ModelParams, alpha: float,
                   lam: float, m: int | None = None) -> float:
    """(1/n)[(1 - alpha) sum sim err^2 + alpha sum_i sum_k aux err^2] + lam ||W||^2."""
    sim_hat = np.asarray(sim_hat, dtype=np.float64)
    sim = np.asarray(sim, dtype=np.float64)
    aux_hat = np.asarray(aux_hat, dtype=np.float64).reshape(len(sim), -1)
    aux = np.asarray(aux, dtype=np.float64).reshape(len(sim), -1)
    if m is not None:
        aux_hat, aux = aux_hat[:, :m], aux[:, :m]
    n = len(sim)
    main = (1.0 - alpha) * np.sum((sim_hat - sim) ** 2)
    side = alpha * np.sum((aux_hat - aux) ** 2)
    return float((main + side) / n) + lam * regularization(params)


def loss_and_grads(params: ModelParams, paths, sim, aux, alpha: float, lam: float):
    """Configured loss (basic when the model has no aux heads) and its gradients."""
    out, cache = forward_batch(params, paths)
    n = len(paths)
    sim = np.asarray(sim, dtype=np.float64)
    d_out = np.zeros_like(out)
    if params.aux_tasks == 0:
        loss = loss_basic(out[:, 0], sim, params, lam)
        d_out[:, 0] = 2.0 * (out[:, 0] - sim) / n
    else:
        aux = np.asarray(aux, dtype=np.float64)[:, :params.aux_tasks]
        loss = loss_multitask(out[:, 0], sim, out[:, 1:], aux, params, alpha, lam)
        d_out[:, 0] = 2.0 * (1.0 - alpha) * (out[:, 0] - sim) / n
        d_out[:, 1:] = 2.0 * alpha * (out[:, 1:] - aux) / n
    grads = backward_batch(params, d_out, cache)
    for k in params.trainable():
        grads[k] += 2.0 * lam * params.tensors[k]
    if params.embedding_mode is EmbeddingMode.PRETRAINED_FROZEN:
        del grads["B"]
    return loss, grads, out


class Adam:
    def __init__(self, params: ModelParams, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.names = params.trainable()
        self.m = {k: np.zeros_like(params.tensors[k]) for k in self.names}
        self.v = {k: np.zeros_like(params.tensors[k]) for k in self.names}
        self.t = 0

    def step(self, params: ModelParams, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in self.names:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            step = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params.tensors[k] -= step


@dataclass
class EpochLog:
    epoch: int
    loss: float
    train_mse: float
    val_mse: float
    saved: bool


@dataclass
class TrainResult:
    params: ModelParams
    log: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_train_mse(self) -> float:
        saved = [e.train_mse for e in self.log if e.saved]
        return min(saved) if saved else math.inf


def _arrays(instances: Sequence[TrainingInstance], normalizer: AuxNormalizer | None):
    paths = [inst.path for inst in instances]
    sim = np.array([inst.label for inst in instances], dtype=np.float64)
    if normalizer is None:
        aux = np.zeros((len(instances), 3))
    else:
        aux = np.array([normalizer.apply(inst.aux) for inst in instances], dtype=np.float64)
    return paths, sim, aux.reshape(len(instances), 3)


def predict(params: ModelParams, paths: Sequence[Sequence[int]], batch_size: int = 256) -> np.ndarray:
    """Raw head outputs ``(n, 1 + aux_tasks)``."""
    if not paths:
        return np.zeros((0, 1 + params.aux_tasks))
    chunks = [forward_batch(params, paths[i:i + batch_size])[0]
              for i in range(0, len(paths), batch_size)]
    return np.vstack(chunks)


def mse(params: ModelParams, instances: Sequence[TrainingInstance], batch_size: int = 256) -> float:
    if not instances:
        return math.nan
    sim = np.array([inst.label for inst in instances])
    est = predict(params, [inst.path for inst in instances], batch_size)[:, 0]
    return float(np.mean((est - sim) ** 2))


def train(train_set: Sequence[TrainingInstance], val_set: Sequence[TrainingInstance],
          config: TrainConfig, vertex_count: int, pretrained: np.ndarray | None = None,
          normalizer: AuxNormalizer | None = None) -> TrainResult:
    """Mini-batch Adam on the configured loss.

    After every epoch the full training and validation similarity MSE are
    measured; a checkpoint is taken when training MSE improves and, within
    that, validation MSE improves.  The best checkpoint is returned.
    """
    if not train_set or not val_set:
        raise ValidationError("training and validation sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    params = init_params(vertex_count, config, pretrained, rng)
    if config.aux_tasks and normalizer is None:
        raise ValidationError("aux tasks need a fitted normalizer")
    params.normalizer = normalizer
    paths, sim, aux = _arrays(train_set, normalizer)
    opt = Adam(params, lr=config.learning_rate)
    best = params.copy()
    result = TrainResult(best)
    prev_train = prev_val = math.inf
    n = len(paths)
    for epoch in range(1, config.max_epoch + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads, _ = loss_and_grads(params, [paths[i] for i in idx], sim[idx],
                                            aux[idx], config.alpha, config.lam)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"loss became {loss} at epoch {epoch}; lower learning_rate "
                    f"(now {config.learning_rate}) or lambda")
            opt.step(params, grads)
            total += loss * len(idx)
        train_mse = mse(params, train_set)
        val_mse = mse(params, val_set)
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise DivergenceError(f"non-finite MSE at epoch {epoch}")
        saved = False
        if train_mse < prev_train:
            prev_train = train_mse
            if val_mse < prev_val:
                prev_val = val_mse
                best = params.copy()
                result.best_epoch = epoch
                saved = True
        result.log.append(EpochLog(epoch, total / n, train_mse, val_mse, saved))
        log.info("epoch %d loss %.6g train %.6g val %.6g%s", epoch, total / n,
                 train_mse, val_mse, " *" if saved else "")
    result.params = best
    return result


def predict_and_rank(params: ModelParams, candidates: Sequence[Sequence[int]]) -> list[tuple]:
    """Candidates by descending estimated similarity; ties keep input order."""
    # score each distinct path once so duplicates cannot differ by batch rounding
    unique = list(dict.fromkeys(tuple(c) for c in candidates))
    by_path = dict(zip(unique, predict(params, unique)[:, 0])) if unique else {}
    scores = [by_path[tuple(c)] for c in candidates]
    order = sorted(range(len(candidates)), key=lambda i: -scores[i])
    return [(tuple(candidates[i]), float(scores[i])) for i in order]


def save_checkpoint(params: ModelParams, stream: BinaryIO, extra: dict | None = None) -> None:
    """Magic line, one JSON header line, then little-endian float64 tensors."""
    entries = []
    offset = 0
    for name in sorted(params.tensors):
        arr = params.tensors[name]
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    norm = params.normalizer
    header = {
        "version": CHECKPOINT_VERSION,
        "vertex_count": params.vertex_count,
        "dim": params.dim,
        "z_max": params.z_max,
        "aux_tasks": params.aux_tasks,
        "embedding_mode": params.embedding_mode.value,
        "gru_bias": params.gru_bias,
        "normalizer": None if norm is None else {"mean": list(norm.mean), "std": list(norm.std)},
        "dtype": "<f8",
        "tensors": entries,
        "extra": extra or {},
    }
    stream.write(CHECKPOINT_MAGIC)
    stream.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
    for name in sorted(params.tensors):
        stream.write(np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes())


def load_checkpoint(stream: BinaryIO) -> ModelParams:
    if stream.readline() != CHECKPOINT_MAGIC:
        raise ParseError("not a checkpoint file (bad magic)")
    try:
        header = json.loads(stream.readline().decode("ascii"))
    except (ValueError, UnicodeDecodeError):
        raise ParseError("checkpoint header is not valid JSON") from None
    if header.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {header.get('version')!r}")
    blob = stream.read()
    tensors = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        if start + count * 8 > len(blob):
            raise ParseError(f"checkpoint truncated in tensor {entry['name']}")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float64)
    norm = header.get("normalizer")
    params = ModelParams(
        tensors, header["z_max"], header["aux_tasks"],
        EmbeddingMode(header["embedding_mode"]),
        None if norm is None else AuxNormalizer(tuple(norm["mean"]), tuple(norm["std"])))
    if params.tensors["B"].shape != (header["vertex_count"], header["dim"]):
        raise ParseError("checkpoint header disagrees with embedding shape")
    return params


def checkpoint_bytes(params: ModelParams, extra: dict | None = None) -> bytes:
    buf = io.BytesIO()
    save_checkpoint(params, buf, extra)
    return buf.getvalue()


def training_log_lines(result: TrainResult) -> list[str]:
    lines = ["epoch,loss,train_mse,val_mse,saved"]
    for e in result.log:
        lines.append(f"{e.epoch},{e.loss!r},{e.train_mse!r},{e.val_mse!r},{int(e.saved)}")
    return lines


def config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["embedding_mode"] = config.embedding_mode.value
    return d
