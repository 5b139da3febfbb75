"""Shared test fixtures and small dataset builders."""
import numpy as np
import pytest

from adareg.datagen import Batch, Dataset


def make_dataset(columns, labels=None, feature_cards=None):
    """Build a Dataset from explicit ID columns (lists or arrays)."""
    columns = [np.asarray(c, dtype=np.int64) for c in columns]
    t = len(columns[0])
    if labels is None:
        labels = np.arange(t) % 2
    if feature_cards is None:
        feature_cards = [int(c.max()) + 1 for c in columns]
    return Dataset(labels=np.asarray(labels, dtype=np.int64), columns=columns, feature_cards=feature_cards)


def make_batch(ids, labels=None):
    ids = [np.asarray(c, dtype=np.int64) for c in ids]
    if labels is None:
        labels = np.arange(len(ids[0])) % 2
    return Batch(labels=np.asarray(labels, dtype=np.int64), ids=ids)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
