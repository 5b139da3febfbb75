"""Sklearn-style classifier over sparse categorical IDs.

The estimator owns the full training loop (mini-batches, per-epoch
reshuffling, optional epoch-boundary embedding reinitialization) so both the
experiment harness and plain sklearn pipelines share one code path. ``X`` is
an integer matrix with one column per categorical feature.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .datagen import Batch, Dataset, batch_iter
from .model import backward, embed_lookup, forward, init_model, loss_bce
from .optim import OptimizerConfig, meda_reinit, optimizer_step


class SparseCTRClassifier(BaseEstimator, ClassifierMixin):
    """Embedding-plus-MLP binary classifier trained with any of the six
    optimizer families.

    Parameters mirror the harness config: ``optimizer`` selects the family,
    ``alpha`` is the adaptive-decay base coefficient for the AR families,
    ``weight_decay`` the constant decoupled decay for the W families. With
    ``meda=True`` all embedding rows and their optimizer state are zeroed at
    the start of every epoch after the first.
    """

    def __init__(
        self,
        hidden_sizes=(64, 32),
        embedding_dim=16,
        optimizer="adam",
        learning_rate=0.001,
        alpha=0.0,
        weight_decay=0.0,
        epochs=1,
        batch_size=512,
        use_bias=False,
        meda=False,
        update_mode="lazy",
        init_seed=0,
        shuffle_seed=None,
        feature_cards=None,
    ):
        self.hidden_sizes = hidden_sizes
        self.embedding_dim = embedding_dim
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.use_bias = use_bias
        self.meda = meda
        self.update_mode = update_mode
        self.init_seed = init_seed
        self.shuffle_seed = shuffle_seed
        self.feature_cards = feature_cards

    def _optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            family=self.optimizer,
            learning_rate=self.learning_rate,
            alpha=self.alpha,
            weight_decay=self.weight_decay,
            meda_enabled=self.meda,
            update_mode=self.update_mode,
        )

    def _as_dataset(self, X, y) -> Dataset:
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D integer array of feature IDs")
        y = np.asarray(y, dtype=np.int64)
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("y must be binary (0/1)")
        cards = self.feature_cards
        if cards is None:
            cards = [int(X[:, j].max()) + 1 for j in range(X.shape[1])]
        return Dataset(labels=y, columns=[X[:, j] for j in range(X.shape[1])], feature_cards=list(cards))

    def fit(self, X, y, eval_every=None, eval_hook=None):
        """Train for ``epochs`` passes over (X, y).

        ``eval_hook(estimator, epoch, step)``, if given, is called after every
        ``eval_every`` optimizer steps and at each epoch end; it can inspect
        ``tables_`` / ``mlp_`` for telemetry.
        """
        ds = self._as_dataset(X, y)
        config = self._optimizer_config()
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        self.tables_, self.mlp_ = init_model(
            ds.feature_cards,
            self.embedding_dim,
            self.hidden_sizes,
            use_bias=self.use_bias,
            init_seed=self.init_seed,
        )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = ds.num_features
        self.feature_cards_ = list(ds.feature_cards)
        self.global_step_ = 0

        last_hook_step = -1
        for epoch in range(1, self.epochs + 1):
            if self.meda and epoch >= 2:
                meda_reinit(self.tables_)
            for batch in batch_iter(ds, self.batch_size, self.shuffle_seed, epoch):
                self.global_step_ += 1
                embedded = embed_lookup(self.tables_, batch)
                logits, cache = forward(self.mlp_, embedded)
                loss, dlogits = loss_bce(logits, batch.labels)
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite training loss {loss} at step {self.global_step_}"
                    )
                grads = backward(self.mlp_, self.tables_, batch, cache, dlogits)
                optimizer_step(self.tables_, self.mlp_, grads, self.global_step_, config)
                if (
                    eval_hook is not None
                    and eval_every is not None
                    and self.global_step_ % eval_every == 0
                ):
                    eval_hook(self, epoch, self.global_step_)
                    last_hook_step = self.global_step_
            # epoch-end evaluation, unless a periodic one just fired here
            if eval_hook is not None and last_hook_step != self.global_step_:
                eval_hook(self, epoch, self.global_step_)
                last_hook_step = self.global_step_
        return self

    def decision_function(self, X):
        check_is_fitted(self, "tables_")
        X = np.asarray(X, dtype=np.int64)
        batch = Batch(labels=np.zeros(len(X), dtype=np.int64), ids=[X[:, j] for j in range(X.shape[1])])
        logits, _ = forward(self.mlp_, embed_lookup(self.tables_, batch))
        return logits

    def predict_proba(self, X):
        z = self.decision_function(X)
        p = 1.0 / (1.0 + np.exp(-z))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0.0).astype(np.int64)

    def score_logits(self, ds: Dataset) -> np.ndarray:
        """Logits over an entire Dataset (harness-side evaluation path)."""
        check_is_fitted(self, "tables_")
        out = np.empty(ds.num_samples)
        pos = 0
        for batch in batch_iter(ds, 8192):
            logits, _ = forward(self.mlp_, embed_lookup(self.tables_, batch))
            out[pos : pos + batch.size] = logits
            pos += batch.size
        return out
