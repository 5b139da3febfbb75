"""Synthetic sparse-categorical dataset generation, CSV ingestion, and
frequency-based ID filtering.

Datasets are plain containers: a binary label vector plus one integer ID
column per categorical feature. Generation is fully deterministic given the
seeds in the SynthSpec.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FeatureSpec:
    """One categorical feature: vocabulary size and ID-frequency skew.

    ``zipf_exponent`` 0 means uniform sampling; larger values concentrate
    probability mass on low IDs (ID 0 is always the most frequent).
    """

    cardinality: int
    zipf_exponent: float = 0.0

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"cardinality must be >= 1, got {self.cardinality}")
        if self.zipf_exponent < 0:
            raise ValueError(f"zipf_exponent must be >= 0, got {self.zipf_exponent}")


@dataclass(frozen=True)
class SynthSpec:
    num_samples: int
    features: tuple[FeatureSpec, ...]
    label_noise: float = 0.0
    teacher_seed: int = 0
    data_seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if not self.features:
            raise ValueError("features must be non-empty")
        object.__setattr__(self, "features", tuple(self.features))
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError(f"label_noise must be in [0, 1], got {self.label_noise}")


@dataclass
class Dataset:
    """Labels plus one ID column per feature, all sharing length T."""

    labels: np.ndarray
    columns: list[np.ndarray]
    feature_cards: list[int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.columns = [np.asarray(c, dtype=np.int64) for c in self.columns]
        t = len(self.labels)
        if len(self.columns) != len(self.feature_cards):
            raise ValueError("columns and feature_cards length mismatch")
        for i, col in enumerate(self.columns):
            if len(col) != t:
                raise ValueError(f"column {i} has length {len(col)}, expected {t}")
            if len(col) and (col.min() < 0 or col.max() >= self.feature_cards[i]):
                raise ValueError(
                    f"column {i} contains IDs outside [0, {self.feature_cards[i]})"
                )

    @property
    def num_samples(self) -> int:
        return len(self.labels)

    @property
    def num_features(self) -> int:
        return len(self.columns)

    def slice(self, start: int, stop: int) -> "Dataset":
        return Dataset(
            labels=self.labels[start:stop],
            columns=[c[start:stop] for c in self.columns],
            feature_cards=list(self.feature_cards),
            meta=dict(self.meta),
        )


@dataclass
class Batch:
    labels: np.ndarray
    ids: list[np.ndarray]

    @property
    def size(self) -> int:
        return len(self.labels)


def _zipf_probs(cardinality: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, cardinality + 1, dtype=np.float64)
    weights = ranks ** (-exponent)
    return weights / weights.sum()


# Per-ID teacher score scale: sd = TEACHER_SCALE * N^-TEACHER_EXPONENT.
# Larger vocabularies get weaker per-ID signal, mirroring how huge ID-style
# features behave mostly as identifiers rather than predictors.
TEACHER_SCALE = 0.4
TEACHER_EXPONENT = 0.15


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Sample a dataset from Zipf-weighted categorical columns and a hidden
    logistic teacher.

    Each feature's per-ID teacher score is drawn once from ``teacher_seed``
    with a scale that shrinks with the feature's cardinality; the sample
    logit is the sum of the active IDs' scores. Labels are Bernoulli draws
    from the teacher probability, then flipped with ``label_noise``.
    """
    t = spec.num_samples
    teacher_rng = np.random.default_rng(spec.teacher_seed)
    scores = [
        teacher_rng.normal(0.0, 1.0, size=f.cardinality)
        * TEACHER_SCALE
        * f.cardinality**-TEACHER_EXPONENT
        for f in spec.features
    ]

    data_rng = np.random.default_rng(spec.data_seed)
    columns = []
    for f in spec.features:
        p = _zipf_probs(f.cardinality, f.zipf_exponent)
        columns.append(data_rng.choice(f.cardinality, size=t, p=p))

    logits = np.zeros(t)
    for col, sc in zip(columns, scores):
        logits += sc[col]
    probs = 1.0 / (1.0 + np.exp(-logits))
    labels = (data_rng.random(t) < probs).astype(np.int64)
    if spec.label_noise > 0:
        flips = data_rng.random(t) < spec.label_noise
        labels = labels ^ flips

    return Dataset(
        labels=labels,
        columns=columns,
        feature_cards=[f.cardinality for f in spec.features],
    )


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read ``label,f0,...,f{S-1}`` rows into a Dataset.

    Cardinalities are inferred as per-column max ID + 1. Malformed rows are
    reported with their 1-based line number.
    """
    labels = []
    rows = []
    num_cols = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if lineno == 1 and has_header:
                continue
            if not line:
                continue
            parts = line.split(",")
            if num_cols is None:
                num_cols = len(parts)
                if num_cols < 2:
                    raise ValueError(f"line {lineno}: expected label plus at least one feature")
            elif len(parts) != num_cols:
                raise ValueError(
                    f"line {lineno}: expected {num_cols} fields, got {len(parts)}"
                )
            try:
                values = [int(p) for p in parts]
            except ValueError:
                raise ValueError(f"line {lineno}: non-integer field in {line!r}") from None
            if values[0] not in (0, 1):
                raise ValueError(f"line {lineno}: label must be 0 or 1, got {values[0]}")
            if any(v < 0 for v in values[1:]):
                raise ValueError(f"line {lineno}: negative feature ID in {line!r}")
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.int64)
    columns = [arr[:, j] for j in range(arr.shape[1])]
    return Dataset(
        labels=np.asarray(labels, dtype=np.int64),
        columns=columns,
        feature_cards=[int(c.max()) + 1 for c in columns],
    )


def save_csv(ds: Dataset, path, header: bool = False) -> None:
    """Write a Dataset in the ``load_csv`` format."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("label," + ",".join(f"f{i}" for i in range(ds.num_features)) + "\n")
        cols = np.column_stack([ds.labels] + ds.columns)
        for row in cols:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def filter_by_frequency(ds: Dataset, feature_index: int, r: float) -> Dataset:
    """Keep the top-r fraction of a feature's unique IDs by frequency; remap
    the rest to a reserved default ID.

    Ranking is by descending count, ties broken by ascending ID. The default
    ID is a fresh slot appended to the vocabulary, so kept IDs are unchanged.
    ``r=0`` maps every occurrence to the default ID; ``r=1`` keeps all.
    """
    if not 0 <= feature_index < ds.num_features:
        raise ValueError(f"feature_index {feature_index} out of range [0, {ds.num_features})")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must be in [0, 1], got {r}")

    col = ds.columns[feature_index]
    uniq, counts = np.unique(col, return_counts=True)
    order = np.lexsort((uniq, -counts))
    num_keep = math.ceil(r * len(uniq))
    kept = uniq[order[:num_keep]]

    default_id = ds.feature_cards[feature_index]
    keep_mask = np.zeros(ds.feature_cards[feature_index], dtype=bool)
    keep_mask[kept] = True
    new_col = np.where(keep_mask[col], col, default_id)

    columns = list(ds.columns)
    columns[feature_index] = new_col
    cards = list(ds.feature_cards)
    cards[feature_index] = default_id + 1
    meta = dict(ds.meta)
    meta.setdefault("filters", []).append(
        {
            "feature_index": feature_index,
            "r": r,
            "original_cardinality": ds.feature_cards[feature_index],
            "default_id": int(default_id),
            "unique_ids_kept": int(num_keep),
        }
    )
    meta["filters"] = list(meta["filters"])
    return Dataset(labels=ds.labels.copy(), columns=columns, feature_cards=cards, meta=meta)


def batch_iter(ds: Dataset, batch_size: int, shuffle_seed=None, epoch: int = 0):
    """Yield consecutive Batches; the final partial batch is kept.

    With a shuffle seed, a permutation derived from (seed, epoch) is applied
    first, so the same (seed, epoch) pair always yields the same order.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    t = ds.num_samples
    if shuffle_seed is None:
        labels = ds.labels
        columns = ds.columns
    else:
        perm = np.random.default_rng([int(shuffle_seed), int(epoch)]).permutation(t)
        labels = ds.labels[perm]
        columns = [c[perm] for c in ds.columns]
    for start in range(0, t, batch_size):
        stop = min(start + batch_size, t)
        yield Batch(labels=labels[start:stop], ids=[c[start:stop] for c in columns])
