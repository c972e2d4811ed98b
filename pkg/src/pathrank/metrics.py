"""Score and ranking quality: MAE, MARE, Kendall tau, Spearman rho, baseline rankers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .data import TrainingInstance, Trajectory
from .errors import ValidationError
from .network import CostKind, RoadNetwork, path_cost

BUCKETS_KM = ((0.0, 5.0), (5.0, 10.0), (10.0, 15.0), (15.0, math.inf))


def _pair(truth, est):
    truth = np.asarray(truth, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if truth.shape != est.shape or truth.ndim != 1:
        raise ValidationError(f"length mismatch: {truth.shape} vs {est.shape}")
    if truth.size == 0:
        raise ValidationError("need at least one value")
    return truth, est


def mae(truth: Sequence[float], est: Sequence[float]) -> float:
    truth, est = _pair(truth, est)
    return float(np.mean(np.abs(truth - est)))


def mare(truth: Sequence[float], est: Sequence[float]) -> float:
    truth, est = _pair(truth, est)
    denom = float(np.sum(np.abs(truth)))
    if denom == 0:
        raise ValidationError("MARE undefined: ground truth sums to zero")
    return float(np.sum(np.abs(truth - est))) / denom


def _positions(truth_rank: Sequence[Hashable], est_rank: Sequence[Hashable]):
    if len(set(truth_rank)) != len(truth_rank) or len(set(est_rank)) != len(est_rank):
        raise ValidationError("rankings must not contain duplicates")
    if set(truth_rank) != set(est_rank):
        raise ValidationError("rankings must rank the same elements")
    if len(truth_rank) < 2:
        raise ValidationError("need at least two ranked elements")
    pos = {item: i for i, item in enumerate(est_rank)}
    return [pos[item] for item in truth_rank]


def concordance_counts(truth_rank: Sequence[Hashable],
                       est_rank: Sequence[Hashable]) -> tuple[int, int]:
    """Numbers of concordant and discordant element pairs of two strict rankings."""
    est_pos = _positions(truth_rank, est_rank)
    n = len(est_pos)
    con = dis = 0
    for i in range(n):
        for j in range(i + 1, n):
            if est_pos[i] < est_pos[j]:
                con += 1
            else:
                dis += 1
    return con, dis


def kendall_tau(truth_rank: Sequence[Hashable], est_rank: Sequence[Hashable]) -> float:
    """(concordant - discordant) / (n(n-1)/2) over all unordered pairs."""
    con, dis = concordance_counts(truth_rank, est_rank)
    n = len(truth_rank)
    return (con - dis) / (n * (n - 1) / 2)


def spearman_rho(truth_rank: Sequence[Hashable], est_rank: Sequence[Hashable]) -> float:
    """1 - 6 sum d^2 / (n(n^2 - 1)) with d the rank difference per element."""
    est_pos = _positions(truth_rank, est_rank)
    n = len(est_pos)
    d2 = sum((i - p) ** 2 for i, p in enumerate(est_pos))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def rank_by_score(ids: Sequence[Hashable], scores: Sequence[float],
                  descending: bool = True) -> list:
    """Order ids by score; equal scores keep input order."""
    sign = -1.0 if descending else 1.0
    order = sorted(range(len(ids)), key=lambda i: sign * scores[i])
    return [ids[i] for i in order]


def baseline_rank(network: RoadNetwork, candidates: Sequence[Sequence[int]],
                  kind: CostKind) -> list[tuple]:
    """Candidates by ascending travel cost of the given kind."""
    paths = [tuple(c) for c in candidates]
    costs = [path_cost(network, p, kind) for p in paths]
    return rank_by_score(paths, costs, descending=False)


def baseline_scorer(network: RoadNetwork, kind: CostKind) -> Callable:
    """Scorer whose descending order is the ascending cost order."""
    return lambda paths: np.array([-path_cost(network, p, kind) for p in paths])


def bucket_of(length_m: float) -> str:
    km = length_m / 1000.0
    for lo, hi in BUCKETS_KM:
        if lo < km <= hi:
            return bucket_name(lo, hi)
    return bucket_name(*BUCKETS_KM[0])


def bucket_name(lo: float, hi: float) -> str:
    """Comma-free label so report lines stay three-column CSV: ``lo < km <= hi``."""
    return f"{lo:g}-{hi:g}" if math.isfinite(hi) else f"{lo:g}-inf"


@dataclass
class TrajectoryScore:
    index: int
    bucket: str
    n: int
    tau: float
    rho: float
    abs_err: float
    abs_truth: float
    ties: bool


@dataclass
class Report:
    name: str
    records: list = field(default_factory=list)
    skipped: int = 0
    with_scores: bool = True

    def _select(self, bucket):
        return [r for r in self.records if bucket is None or r.bucket == bucket]

    def summary(self, bucket: str | None = None) -> dict:
        recs = self._select(bucket)
        out = {"count": len(recs), "tau": math.nan, "rho": math.nan,
               "mae": math.nan, "mare": math.nan}
        if not recs:
            return out
        out["tau"] = sum(r.tau for r in recs) / len(recs)
        out["rho"] = sum(r.rho for r in recs) / len(recs)
        if self.with_scores:
            n = sum(r.n for r in recs)
            out["mae"] = sum(r.abs_err for r in recs) / n
            truth = sum(r.abs_truth for r in recs)
            out["mare"] = sum(r.abs_err for r in recs) / truth if truth else math.nan
        return out

    @property
    def tie_count(self) -> int:
        return sum(r.ties for r in self.records)

    def buckets(self) -> list[str]:
        return [bucket_name(lo, hi) for lo, hi in BUCKETS_KM]

    def lines(self) -> list[str]:
        """Machine-readable ``metric,bucket,value`` rows."""
        rows = []
        for bucket in [None, *self.buckets()]:
            s = self.summary(bucket)
            label = "all" if bucket is None else bucket
            for metric in ("count", "mae", "mare", "tau", "rho"):
                rows.append(f"{metric},{label},{s[metric]!r}")
        rows.append(f"skipped,all,{self.skipped}")
        rows.append(f"ties,all,{self.tie_count}")
        return rows

    def table(self) -> str:
        head = f"{'bucket (km)':<14}{'n':>6}{'MAE':>10}{'MARE':>10}{'tau':>10}{'rho':>10}"
        rows = [f"{self.name}", head]
        for bucket in [None, *self.buckets()]:
            s = self.summary(bucket)
            rows.append(f"{'all' if bucket is None else bucket:<14}{s['count']:>6}"
                        f"{s['mae']:>10.4f}{s['mare']:>10.4f}{s['tau']:>10.4f}{s['rho']:>10.4f}")
        rows.append(f"skipped (<2 candidates): {self.skipped}; score ties: {self.tie_count}")
        return "\n".join(rows)


def evaluate(scorer: Callable, network: RoadNetwork, trajectories: Sequence[Trajectory],
             candidate_sets: Sequence[Sequence[TrainingInstance]], name: str = "model",
             with_scores: bool = True) -> Report:
    """Per-trajectory tau/rho between label and score rankings, macro-averaged.

    ``scorer`` maps a list of paths to an array of scores (higher is better).
    MAE/MARE pool every estimate; they are meaningless for cost baselines,
    which pass ``with_scores=False``.
    """
    if not trajectories:
        raise ValidationError("test set is empty")
    if len(trajectories) != len(candidate_sets):
        raise ValidationError("one candidate set per trajectory expected")
    report = Report(name, with_scores=with_scores)
    for i, (traj, cands) in enumerate(zip(trajectories, candidate_sets)):
        if len(cands) < 2:
            report.skipped += 1
            continue
        paths = [c.path for c in cands]
        truth = np.array([c.label for c in cands])
        est = np.asarray(scorer(paths), dtype=np.float64)
        ids = list(range(len(paths)))
        truth_rank = rank_by_score(ids, truth.tolist())
        est_rank = rank_by_score(ids, est.tolist())
        err = float(np.sum(np.abs(truth - est))) if with_scores else math.nan
        report.records.append(TrajectoryScore(
            i, bucket_of(path_cost(network, traj.path, CostKind.DISTANCE)), len(paths),
            kendall_tau(truth_rank, est_rank), spearman_rho(truth_rank, est_rank),
            err, float(np.sum(np.abs(truth))), len(set(est.tolist())) < len(est)))
    return report
