"""Evaluation metrics, embedding-norm telemetry, per-feature update-interval
statistics, and the closed-form norm-based capacity bound."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .datagen import Dataset, batch_iter
from .model import EmbeddingTable


@dataclass
class EvalRecord:
    epoch: int
    step: int
    split: str
    auc: float
    logloss: float
    emb_l2_sum: float
    emb_sq_sum: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


@dataclass
class FeatureStat:
    feature_index: int
    unique_ids: int
    mean_occurrences: float
    mean_update_interval: float


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties
    counted half. Rank-sum (Mann-Whitney) formulation, O(n log n)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise ValueError("scores and labels length mismatch")
    num_pos = int(np.sum(labels == 1))
    num_neg = int(np.sum(labels == 0))
    if num_pos == 0 or num_neg == 0:
        raise ValueError("AUC undefined: need at least one positive and one negative label")
    ranks = rankdata(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    u = pos_rank_sum - num_pos * (num_pos + 1) / 2.0
    return u / (num_pos * num_neg)


def logloss(scores, labels) -> float:
    """Mean binary cross-entropy of logit scores against 0/1 labels."""
    z = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def embedding_norms(tables: list[EmbeddingTable]):
    """Sum of per-row l2 norms and squared norms over all tables.

    Returns (l2_sum, sq_sum, per_feature) where per_feature lists the
    (l2_sum, sq_sum) contribution of each table.
    """
    per_feature = []
    for table in tables:
        row_sq = np.sum(table.rows * table.rows, axis=1)
        per_feature.append((float(np.sum(np.sqrt(row_sq))), float(np.sum(row_sq))))
    l2_sum = sum(p[0] for p in per_feature)
    sq_sum = sum(p[1] for p in per_feature)
    return l2_sum, sq_sum, per_feature


def feature_stats(ds: Dataset, batch_size: int) -> list[FeatureStat]:
    """Simulate the unshuffled batch stream and record, for every ID touch at
    step k with previous last-update step s, the interval I = k - s - 1
    (first touches use s = 0). Reports the mean interval per feature."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if ds.num_samples == 0:
        raise ValueError("empty dataset")
    lvs = [np.zeros(n, dtype=np.int64) for n in ds.feature_cards]
    seen = [np.zeros(n, dtype=bool) for n in ds.feature_cards]
    interval_sum = [0] * ds.num_features
    touch_total = [0] * ds.num_features
    for k, batch in enumerate(batch_iter(ds, batch_size), start=1):
        for i, ids in enumerate(batch.ids):
            uniq = np.unique(ids)
            interval_sum[i] += int(np.sum(k - lvs[i][uniq] - 1))
            touch_total[i] += len(uniq)
            lvs[i][uniq] = k
            seen[i][uniq] = True
    stats = []
    for i in range(ds.num_features):
        unique_seen = int(np.sum(seen[i]))
        stats.append(
            FeatureStat(
                feature_index=i,
                unique_ids=unique_seen,
                mean_occurrences=ds.num_samples / unique_seen,
                mean_update_interval=interval_sum[i] / touch_total[i],
            )
        )
    return stats


def write_feature_stats_csv(stats: list[FeatureStat], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature_index", "unique_ids", "mean_occurrences", "mean_update_interval"])
        for s in stats:
            writer.writerow(
                [s.feature_index, s.unique_ids, repr(s.mean_occurrences), repr(s.mean_update_interval)]
            )


@dataclass(frozen=True)
class BoundInputs:
    frobenius_norms: tuple[float, ...]
    sum_tau: float
    num_features: int
    num_samples: int
    num_layers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "frobenius_norms", tuple(self.frobenius_norms))


def rademacher_bound(b: BoundInputs) -> float:
    """Closed-form capacity bound: the product of layer Frobenius norms times
    sqrt(S/T) times the root of the total squared embedding norm, with a
    sqrt(2 ln2 L) + 1 depth factor."""
    num_layers = b.num_layers if b.num_layers is not None else len(b.frobenius_norms)
    if b.num_samples <= 0 or b.num_features <= 0 or num_layers <= 0:
        raise ValueError("num_samples, num_features, and num_layers must be positive")
    if b.sum_tau < 0:
        raise ValueError(f"sum_tau must be >= 0, got {b.sum_tau}")
    if any(m <= 0 for m in b.frobenius_norms):
        raise ValueError("frobenius_norms must all be positive")
    prod = math.prod(b.frobenius_norms)
    return (
        prod
        * math.sqrt(b.num_features)
        / math.sqrt(b.num_samples)
        * math.sqrt(b.sum_tau)
        * (math.sqrt(2.0 * math.log(2.0) * num_layers) + 1.0)
    )


def mlp_frobenius_norms(weights: list[np.ndarray]) -> list[float]:
    return [float(np.linalg.norm(w)) for w in weights]
