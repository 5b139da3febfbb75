"""Six optimizer families with interval-adaptive decoupled weight decay.

Families: adam, adamw, adam_ar, adagrad, adagradw, adagrad_ar. The AR
families decay each embedding row by lambda = min(1, alpha * I) where I is
the number of steps since the row was last updated; dense MLP parameters are
updated every step, so their interval (and decay) is identically zero. The
W families apply a constant decoupled decay; plain families apply none. In
all families the decay is subtracted directly (not scaled by the learning
rate) so the conventions are comparable.

Canonical update mode is ``lazy``: a row's moments and decay are processed
only at steps where its ID appears in the batch, with bias correction driven
by the row's own touch count. ``dense_faithful`` processes every row every
step (zero gradient for absent rows, global-step bias correction) for
tiny-model comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EmbeddingTable, MlpParams, SparseGrads

ADAM_FAMILIES = ("adam", "adamw", "adam_ar")
ADAGRAD_FAMILIES = ("adagrad", "adagradw", "adagrad_ar")
FAMILIES = ADAM_FAMILIES + ADAGRAD_FAMILIES
AR_FAMILIES = ("adam_ar", "adagrad_ar")
WDECAY_FAMILIES = ("adamw", "adagradw")


@dataclass
class OptimizerConfig:
    family: str = "adam"
    learning_rate: float = 0.001
    alpha: float = 0.0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    meda_enabled: bool = False
    update_mode: str = "lazy"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown optimizer family {self.family!r}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.update_mode not in ("lazy", "dense_faithful"):
            raise ValueError(f"unknown update_mode {self.update_mode!r}")


def lambda_adaptive(k: int, s_prev: int, alpha: float) -> float:
    """Adaptive decay coefficient min(1, alpha * I) with I = k - s_prev - 1."""
    if s_prev >= k:
        raise ValueError(f"last update step {s_prev} cannot be >= current step {k}")
    interval = k - s_prev - 1
    return min(1.0, alpha * interval)


def _check_finite(grads: SparseGrads, k: int) -> None:
    bad = []
    for i, (ids, g) in enumerate(grads.embed):
        if not np.all(np.isfinite(g)):
            bad.append(f"embedding table {i}")
    for l, g in enumerate(grads.dweights):
        if not np.all(np.isfinite(g)):
            bad.append(f"weight matrix {l}")
    if grads.dbiases is not None:
        for l, g in enumerate(grads.dbiases):
            if not np.all(np.isfinite(g)):
                bad.append(f"bias vector {l}")
    if bad:
        raise ValueError(f"non-finite gradient at step {k} in: {', '.join(bad)}")


def _row_decay(table: EmbeddingTable, ids: np.ndarray, k: int, config: OptimizerConfig):
    """Per-row decoupled decay coefficient for a sparse update at step k."""
    if config.family in AR_FAMILIES:
        if np.any(table.lvs[ids] >= k):
            raise ValueError(f"row LVS ahead of current step {k}")
        intervals = k - table.lvs[ids] - 1
        return np.minimum(1.0, config.alpha * intervals)
    if config.family in WDECAY_FAMILIES:
        return np.full(len(ids), config.weight_decay)
    return np.zeros(len(ids))


def _adam_direction(m, v, count, config):
    """Bias-corrected Adam step direction (without the learning rate)."""
    mhat = m / (1.0 - config.beta1 ** count)
    vhat = v / (1.0 - config.beta2 ** count)
    return mhat / (np.sqrt(vhat) + config.eps)


def _update_table_lazy(table, ids, g, k, config):
    eta = config.learning_rate
    lam = _row_decay(table, ids, k, config)[:, None]
    if config.family in ADAM_FAMILIES:
        m = config.beta1 * table.moment1[ids] + (1.0 - config.beta1) * g
        v = config.beta2 * table.moment2[ids] + (1.0 - config.beta2) * g * g
        count = (table.touch_count[ids] + 1)[:, None].astype(np.float64)
        step = _adam_direction(m, v, count, config)
        table.moment1[ids] = m
        table.moment2[ids] = v
    else:
        v = table.moment2[ids] + g * g
        step = g / (np.sqrt(v) + config.eps)
        table.moment2[ids] = v
    table.rows[ids] = table.rows[ids] - lam * table.rows[ids] - eta * step
    table.lvs[ids] = k
    table.touch_count[ids] += 1


def _update_table_dense_faithful(table, ids, g, k, config):
    # Every row processed each step; absent rows see a zero gradient but
    # still accrue moment decay (Adam) and adaptive decay.
    eta = config.learning_rate
    g_full = np.zeros_like(table.rows)
    g_full[ids] = g
    all_ids = np.arange(table.cardinality)
    lam = _row_decay(table, all_ids, k, config)[:, None]
    if config.family in ADAM_FAMILIES:
        table.moment1[:] = config.beta1 * table.moment1 + (1.0 - config.beta1) * g_full
        table.moment2[:] = config.beta2 * table.moment2 + (1.0 - config.beta2) * g_full * g_full
        step = _adam_direction(table.moment1, table.moment2, float(k), config)
    else:
        table.moment2[:] = table.moment2 + g_full * g_full
        step = g_full / (np.sqrt(table.moment2) + config.eps)
    table.rows[:] = table.rows - lam * table.rows - eta * step
    table.lvs[ids] = k
    table.touch_count[ids] += 1


def _update_dense_matrix(theta, m1, m2, g, count, config):
    eta = config.learning_rate
    decay = config.weight_decay if config.family in WDECAY_FAMILIES else 0.0
    if config.family in ADAM_FAMILIES:
        m1[:] = config.beta1 * m1 + (1.0 - config.beta1) * g
        m2[:] = config.beta2 * m2 + (1.0 - config.beta2) * g * g
        step = _adam_direction(m1, m2, float(count), config)
    else:
        m2[:] = m2 + g * g
        step = g / (np.sqrt(m2) + config.eps)
    theta[:] = theta - decay * theta - eta * step


def optimizer_step(
    tables: list[EmbeddingTable],
    params: MlpParams,
    grads: SparseGrads,
    k: int,
    config: OptimizerConfig,
) -> None:
    """Apply one optimizer step at global step k (already incremented).

    Embedding rows touched by the batch get the sparse update with their
    family's decay rule; dense matrices are updated every step (zero adaptive
    decay, since their interval is always zero).
    """
    _check_finite(grads, k)
    update_table = (
        _update_table_lazy if config.update_mode == "lazy" else _update_table_dense_faithful
    )
    for table, (ids, g) in zip(tables, grads.embed):
        update_table(table, ids, g, k, config)

    params.steps += 1
    count = params.steps
    for l, g in enumerate(grads.dweights):
        _update_dense_matrix(
            params.weights[l], params.w_moment1[l], params.w_moment2[l], g, count, config
        )
    if params.biases is not None and grads.dbiases is not None:
        for l, g in enumerate(grads.dbiases):
            _update_dense_matrix(
                params.biases[l], params.b_moment1[l], params.b_moment2[l], g, count, config
            )


def adam_ar_step(tables, params, grads, k, config):
    if config.family not in ADAM_FAMILIES:
        raise ValueError(f"adam_ar_step called with family {config.family!r}")
    optimizer_step(tables, params, grads, k, config)


def adagrad_ar_step(tables, params, grads, k, config):
    if config.family not in ADAGRAD_FAMILIES:
        raise ValueError(f"adagrad_ar_step called with family {config.family!r}")
    optimizer_step(tables, params, grads, k, config)


def baseline_step(tables, params, grads, k, config):
    if config.family in AR_FAMILIES:
        raise ValueError(f"baseline_step called with AR family {config.family!r}")
    optimizer_step(tables, params, grads, k, config)


def meda_reinit(tables: list[EmbeddingTable]) -> None:
    """Reset all embedding rows and their optimizer state to zero.

    MLP parameters and their state are deliberately untouched.
    """
    for table in tables:
        table.reset()


def meda_schedule_interval(k: int, batch_size: int, num_samples: int, alpha: float) -> float:
    """Interval schedule under which epoch-boundary reinitialization appears
    as a special case of the adaptive rule: 1/alpha at epoch boundaries
    (forcing lambda = 1), zero elsewhere."""
    if batch_size < 1 or num_samples < 1:
        raise ValueError("batch_size and num_samples must be >= 1")
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    return 1.0 / alpha if (k * batch_size) % num_samples == 0 else 0.0


def update_norm_bound(theta_old: np.ndarray, grad_step: np.ndarray, alpha: float, interval: int) -> float:
    """Upper bound on the post-update norm of a decayed parameter:
    (1 - alpha)^I * ||theta_old|| + ||grad_step||."""
    return (1.0 - alpha) ** interval * float(np.linalg.norm(theta_old)) + float(
        np.linalg.norm(grad_step)
    )
