"""Embedding lookup plus a bias-free ReLU MLP with analytic gradients.

Everything is float64 numpy. Embedding parameters are row-sparse: a batch
touches only the rows whose IDs appear in it, and ``backward`` returns
gradients only for those rows. Optimizer moments live next to the parameters
they belong to so sparse updates stay local.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import Batch


@dataclass
class EmbeddingTable:
    """One feature's N x d embedding matrix plus per-row optimizer state.

    ``lvs`` is each row's last valid update step; ``touch_count`` is how many
    optimizer updates the row has received (drives lazy bias correction).
    """

    rows: np.ndarray
    lvs: np.ndarray
    moment1: np.ndarray
    moment2: np.ndarray
    touch_count: np.ndarray

    @classmethod
    def zeros(cls, cardinality: int, dim: int) -> "EmbeddingTable":
        return cls(
            rows=np.zeros((cardinality, dim)),
            lvs=np.zeros(cardinality, dtype=np.int64),
            moment1=np.zeros((cardinality, dim)),
            moment2=np.zeros((cardinality, dim)),
            touch_count=np.zeros(cardinality, dtype=np.int64),
        )

    @property
    def cardinality(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def reset(self) -> None:
        """Zero the rows and all optimizer bookkeeping (MEDA reinit)."""
        self.rows[:] = 0.0
        self.moment1[:] = 0.0
        self.moment2[:] = 0.0
        self.lvs[:] = 0
        self.touch_count[:] = 0


@dataclass
class MlpParams:
    """Dense layer matrices W_1..W_L (each out x in) with optimizer state.

    Biases are optional and default off. ``steps`` counts optimizer updates
    applied to the dense block (dense parameters are touched every step).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None = None
    w_moment1: list[np.ndarray] = field(default_factory=list)
    w_moment2: list[np.ndarray] = field(default_factory=list)
    b_moment1: list[np.ndarray] = field(default_factory=list)
    b_moment2: list[np.ndarray] = field(default_factory=list)
    steps: int = 0

    def __post_init__(self):
        for l in range(1, len(self.weights)):
            if self.weights[l].shape[1] != self.weights[l - 1].shape[0]:
                raise ValueError(
                    f"layer {l + 1} input dim {self.weights[l].shape[1]} does not match "
                    f"layer {l} output dim {self.weights[l - 1].shape[0]}"
                )
        if self.weights[-1].shape[0] != 1:
            raise ValueError("final layer must have output dim 1")
        if not self.w_moment1:
            self.w_moment1 = [np.zeros_like(w) for w in self.weights]
            self.w_moment2 = [np.zeros_like(w) for w in self.weights]
        if self.biases is not None and not self.b_moment1:
            self.b_moment1 = [np.zeros_like(b) for b in self.biases]
            self.b_moment2 = [np.zeros_like(b) for b in self.biases]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]


@dataclass
class ForwardCache:
    """Per-batch activations saved for backprop."""

    x: np.ndarray
    pre_acts: list[np.ndarray]
    acts: list[np.ndarray]

    @property
    def batch_size(self) -> int:
        return self.x.shape[0]


@dataclass
class SparseGrads:
    """Gradients restricted to touched embedding rows, plus dense grads.

    ``embed[i]`` is a pair (row_ids, grad_matrix) where grad_matrix[j] is the
    summed gradient for table i row row_ids[j].
    """

    embed: list[tuple[np.ndarray, np.ndarray]]
    dweights: list[np.ndarray]
    dbiases: list[np.ndarray] | None = None


def init_model(
    feature_cards,
    embedding_dims,
    hidden_sizes,
    use_bias: bool = False,
    init_seed: int = 0,
) -> tuple[list[EmbeddingTable], MlpParams]:
    """Build zero-initialized embedding tables and a Glorot-uniform MLP.

    ``embedding_dims`` may be a single int (shared) or one int per feature.
    The MLP maps the concatenated embeddings through ``hidden_sizes`` ReLU
    layers to a single logit.
    """
    if isinstance(embedding_dims, int):
        embedding_dims = [embedding_dims] * len(feature_cards)
    if len(embedding_dims) != len(feature_cards):
        raise ValueError("embedding_dims must match feature count")
    for d in embedding_dims:
        if d < 1:
            raise ValueError(f"embedding dim must be >= 1, got {d}")

    tables = [EmbeddingTable.zeros(n, d) for n, d in zip(feature_cards, embedding_dims)]

    dims = [sum(embedding_dims)] + list(hidden_sizes) + [1]
    rng = np.random.default_rng(init_seed)
    weights = []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
    biases = [np.zeros(dims[l + 1]) for l in range(len(dims) - 1)] if use_bias else None
    return tables, MlpParams(weights=weights, biases=biases)


def embed_lookup(tables: list[EmbeddingTable], batch: Batch) -> np.ndarray:
    """Concatenate each sample's embedding rows into a (B, sum d_i) matrix."""
    parts = []
    for i, (table, ids) in enumerate(zip(tables, batch.ids)):
        if len(ids) and (ids.min() < 0 or ids.max() >= table.cardinality):
            bad = int(ids[(ids < 0) | (ids >= table.cardinality)][0])
            raise ValueError(
                f"feature {i}: ID {bad} out of range [0, {table.cardinality})"
            )
        parts.append(table.rows[ids])
    return np.concatenate(parts, axis=1)


def forward(params: MlpParams, embedded: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """ReLU MLP forward pass; no activation after the final layer."""
    if embedded.shape[1] != params.input_dim:
        raise ValueError(
            f"input width {embedded.shape[1]} does not match layer-1 dim {params.input_dim}"
        )
    h = embedded
    pre_acts, acts = [], []
    for l, w in enumerate(params.weights):
        z = h @ w.T
        if params.biases is not None:
            z = z + params.biases[l]
        pre_acts.append(z)
        if l < params.num_layers - 1:
            h = np.maximum(z, 0.0)
        else:
            h = z
        acts.append(h)
    logits = acts[-1][:, 0]
    return logits, ForwardCache(x=embedded, pre_acts=pre_acts, acts=acts)


def loss_bce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits, numerically stable, plus the
    gradient w.r.t. the logits (includes the 1/batch factor)."""
    if len(logits) != len(labels):
        raise ValueError("logits and labels length mismatch")
    if len(logits) == 0:
        raise ValueError("empty batch")
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    sig = 1.0 / (1.0 + np.exp(-z))
    dlogits = (sig - y) / len(z)
    return loss, dlogits


def backward(
    params: MlpParams,
    tables: list[EmbeddingTable],
    batch: Batch,
    cache: ForwardCache,
    dlogits: np.ndarray,
) -> SparseGrads:
    """Exact gradients of the cached forward pass.

    Duplicate IDs within the batch are summed into one row gradient; rows not
    present in the batch get no entry.
    """
    if cache.batch_size != batch.size or len(dlogits) != batch.size:
        raise ValueError("cache/batch/dlogits size mismatch")

    num_layers = params.num_layers
    dweights = [None] * num_layers
    dbiases = [None] * num_layers if params.biases is not None else None

    delta = np.asarray(dlogits, dtype=np.float64)[:, None]
    for l in range(num_layers - 1, -1, -1):
        inp = cache.x if l == 0 else np.maximum(cache.pre_acts[l - 1], 0.0)
        dweights[l] = delta.T @ inp
        if dbiases is not None:
            dbiases[l] = delta.sum(axis=0)
        if l > 0:
            # subgradient 1 at exactly 0: with zero-initialized embeddings and
            # no biases every pre-activation starts at 0, and a zero mask
            # there would block all gradient flow into the embeddings forever
            delta = (delta @ params.weights[l]) * (cache.pre_acts[l - 1] >= 0)

    dx = delta @ params.weights[0]
    embed = []
    offset = 0
    for table, ids in zip(tables, batch.ids):
        d = table.dim
        dx_f = dx[:, offset : offset + d]
        offset += d
        uniq, inv = np.unique(ids, return_inverse=True)
        gmat = np.zeros((len(uniq), d))
        np.add.at(gmat, inv, dx_f)
        embed.append((uniq, gmat))
    return SparseGrads(embed=embed, dweights=dweights, dbiases=dbiases)
