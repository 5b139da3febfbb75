"""Model forward/backward correctness: hand cases and finite differences."""
import numpy as np
import pytest

from adareg.model import (
    EmbeddingTable,
    MlpParams,
    backward,
    embed_lookup,
    forward,
    init_model,
    loss_bce,
)

from conftest import make_batch


def random_model(rng, feature_cards=(5, 5), dim=3, hidden=(4,)):
    tables, params = init_model(list(feature_cards), dim, list(hidden), init_seed=int(rng.integers(1 << 30)))
    for t in tables:
        t.rows[:] = rng.normal(0.0, 0.5, size=t.rows.shape)
    return tables, params


def model_loss(tables, params, batch):
    logits, _ = forward(params, embed_lookup(tables, batch))
    loss, _ = loss_bce(logits, batch.labels)
    return loss


class TestInit:
    def test_embeddings_start_zero(self):
        tables, _ = init_model([3, 7], 4, [8])
        for t in tables:
            assert np.all(t.rows == 0.0)
            assert np.all(t.lvs == 0) and np.all(t.touch_count == 0)

    def test_mlp_shapes_and_glorot_bound(self):
        _, params = init_model([3, 7], 4, [8, 5])
        assert [w.shape for w in params.weights] == [(8, 8), (5, 8), (1, 5)]
        for w in params.weights:
            bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            assert np.all(np.abs(w) <= bound)

    def test_per_feature_dims(self):
        tables, params = init_model([3, 7], [2, 5], [4])
        assert tables[0].dim == 2 and tables[1].dim == 5
        assert params.input_dim == 7

    def test_seed_determinism(self):
        _, a = init_model([3], 4, [8], init_seed=9)
        _, b = init_model([3], 4, [8], init_seed=9)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_validation(self):
        with pytest.raises(ValueError):
            init_model([3], [4, 4], [8])
        with pytest.raises(ValueError):
            init_model([3], 0, [8])
        with pytest.raises(ValueError):
            MlpParams(weights=[np.zeros((4, 3)), np.zeros((1, 5))])
        with pytest.raises(ValueError):
            MlpParams(weights=[np.zeros((2, 3))])


class TestForward:
    def test_lookup_concatenates(self):
        tables, _ = init_model([2, 2], 2, [2])
        tables[0].rows[:] = [[1.0, 2.0], [3.0, 4.0]]
        tables[1].rows[:] = [[5.0, 6.0], [7.0, 8.0]]
        x = embed_lookup(tables, make_batch([[1, 0], [0, 1]]))
        assert np.array_equal(x, [[3.0, 4.0, 5.0, 6.0], [1.0, 2.0, 7.0, 8.0]])

    def test_lookup_out_of_range(self):
        tables, _ = init_model([2], 2, [2])
        with pytest.raises(ValueError, match="out of range"):
            embed_lookup(tables, make_batch([[0, 2]]))

    def test_hand_logit(self):
        # relu(e0) - relu(e1) through an identity hidden layer
        params = MlpParams(weights=[np.eye(2), np.array([[1.0, -1.0]])])
        x = np.array([[3.0, -2.0], [-1.0, 4.0]])
        logits, _ = forward(params, x)
        assert np.allclose(logits, [3.0, -4.0])

    def test_linear_final_layer(self):
        params = MlpParams(weights=[np.array([[2.0, 0.5]])])
        logits, _ = forward(params, np.array([[1.0, -4.0]]))
        assert logits[0] == pytest.approx(0.0)

    def test_bias_shifts_logit(self):
        params = MlpParams(weights=[np.array([[1.0]])], biases=[np.array([0.7])])
        logits, _ = forward(params, np.array([[0.0]]))
        assert logits[0] == pytest.approx(0.7)

    def test_width_mismatch(self):
        params = MlpParams(weights=[np.zeros((1, 3))])
        with pytest.raises(ValueError):
            forward(params, np.zeros((2, 4)))


class TestLoss:
    def test_hand_values(self):
        loss, dlogits = loss_bce(np.array([0.0]), np.array([1]))
        assert loss == pytest.approx(np.log(2.0))
        assert dlogits[0] == pytest.approx(-0.5)

    def test_stable_at_large_logits(self):
        loss, _ = loss_bce(np.array([500.0, -500.0]), np.array([1, 0]))
        assert np.isfinite(loss) and loss == pytest.approx(0.0, abs=1e-12)

    def test_gradient_includes_batch_factor(self):
        _, d = loss_bce(np.zeros(4), np.zeros(4, dtype=np.int64))
        assert np.allclose(d, 0.5 / 4)

    def test_validation(self):
        with pytest.raises(ValueError):
            loss_bce(np.array([0.0]), np.array([0, 1]))
        with pytest.raises(ValueError):
            loss_bce(np.array([]), np.array([]))


class TestBackward:
    def test_duplicate_ids_sum(self, rng):
        tables, params = random_model(rng, feature_cards=(4,))
        batch = make_batch([[2, 2, 1, 2]], labels=[1, 0, 1, 0])
        logits, cache = forward(params, embed_lookup(tables, batch))
        _, dlogits = loss_bce(logits, batch.labels)
        grads = backward(params, tables, batch, cache, dlogits)
        ids, g = grads.embed[0]
        assert np.array_equal(ids, [1, 2])
        assert g.shape == (2, 3)

    def test_untouched_rows_absent(self, rng):
        tables, params = random_model(rng, feature_cards=(6,))
        batch = make_batch([[0, 5]], labels=[1, 0])
        logits, cache = forward(params, embed_lookup(tables, batch))
        _, dlogits = loss_bce(logits, batch.labels)
        grads = backward(params, tables, batch, cache, dlogits)
        assert np.array_equal(grads.embed[0][0], [0, 5])

    def test_finite_difference_embeddings_and_weights(self, rng):
        h = 1e-4
        for _ in range(5):
            tables, params = random_model(rng)
            batch = make_batch([rng.integers(0, 5, 4), rng.integers(0, 5, 4)], labels=rng.integers(0, 2, 4))
            logits, cache = forward(params, embed_lookup(tables, batch))
            _, dlogits = loss_bce(logits, batch.labels)
            grads = backward(params, tables, batch, cache, dlogits)

            for t, (ids, g) in zip(tables, grads.embed):
                for j, row_id in enumerate(ids):
                    for d in range(t.dim):
                        orig = t.rows[row_id, d]
                        t.rows[row_id, d] = orig + h
                        up = model_loss(tables, params, batch)
                        t.rows[row_id, d] = orig - h
                        down = model_loss(tables, params, batch)
                        t.rows[row_id, d] = orig
                        fd = (up - down) / (2 * h)
                        assert g[j, d] == pytest.approx(fd, rel=1e-4, abs=1e-9)

            for l, dw in enumerate(grads.dweights):
                w = params.weights[l]
                for i in range(w.shape[0]):
                    for j in range(w.shape[1]):
                        orig = w[i, j]
                        w[i, j] = orig + h
                        up = model_loss(tables, params, batch)
                        w[i, j] = orig - h
                        down = model_loss(tables, params, batch)
                        w[i, j] = orig
                        fd = (up - down) / (2 * h)
                        assert dw[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-9)

    def test_finite_difference_biases(self, rng):
        h = 1e-4
        tables, params = init_model([5], 3, [4], use_bias=True, init_seed=11)
        for t in tables:
            t.rows[:] = rng.normal(0.0, 0.5, size=t.rows.shape)
        batch = make_batch([rng.integers(0, 5, 4)], labels=rng.integers(0, 2, 4))
        logits, cache = forward(params, embed_lookup(tables, batch))
        _, dlogits = loss_bce(logits, batch.labels)
        grads = backward(params, tables, batch, cache, dlogits)
        for l, db in enumerate(grads.dbiases):
            b = params.biases[l]
            for i in range(len(b)):
                orig = b[i]
                b[i] = orig + h
                up = model_loss(tables, params, batch)
                b[i] = orig - h
                down = model_loss(tables, params, batch)
                b[i] = orig
                assert db[i] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-9)

    def test_size_mismatch(self, rng):
        tables, params = random_model(rng, feature_cards=(4,))
        batch = make_batch([[0, 1]], labels=[1, 0])
        logits, cache = forward(params, embed_lookup(tables, batch))
        with pytest.raises(ValueError):
            backward(params, tables, batch, cache, np.zeros(3))

    def test_gradient_flows_from_zero_init(self):
        # zero embeddings put every pre-activation exactly at 0; the ReLU
        # subgradient there must pass signal or training can never start
        tables, params = init_model([3], 2, [4], init_seed=1)
        batch = make_batch([[0, 1]], labels=[1, 1])
        logits, cache = forward(params, embed_lookup(tables, batch))
        _, dlogits = loss_bce(logits, batch.labels)
        grads = backward(params, tables, batch, cache, dlogits)
        assert any(np.any(g != 0.0) for _, g in grads.embed)
