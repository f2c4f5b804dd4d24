import numpy as np
import pytest

from scorer_service import nn
from scorer_service.nn import Adam, NnError, ParamStore, Tensor, backprop_check


class TestOps:
    def test_backward_requires_scalar(self):
        with pytest.raises(NnError):
            Tensor(np.zeros(3), requires_grad=True).backward()

    def test_matmul_gradients_exact(self):
        a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
        b = Tensor(np.array([[0.5, -1.0], [2.0, 0.0]]), requires_grad=True)
        nn.tsum(a @ b).backward()
        assert np.allclose(a.grad, np.ones((2, 2)) @ b.data.T)
        assert np.allclose(b.grad, a.data.T @ np.ones((2, 2)))

    def test_softmax_rows_sum_to_one(self):
        y = nn.softmax_rows(Tensor(np.random.default_rng(0).normal(size=(3, 5))))
        assert np.allclose(y.data.sum(axis=1), 1.0)

    def test_log_softmax_matches_reference(self):
        x = np.array([1.0, 2.0, 3.0])
        y = nn.log_softmax(Tensor(x)).data
        assert np.allclose(np.exp(y).sum(), 1.0)
        assert np.allclose(y, x - np.log(np.exp(x).sum()))

    def test_layer_norm_rows_standardized(self):
        x = Tensor(np.random.default_rng(1).normal(2.0, 3.0, size=(4, 8)))
        y = nn.layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8)))
        assert np.allclose(y.data.mean(axis=1), 0.0, atol=1e-12)
        assert np.allclose(y.data.std(axis=1), 1.0, atol=1e-3)

    def test_dropout_inference_is_identity(self):
        x = Tensor(np.ones(5))
        assert nn.dropout(x, 0.5, None) is x


class TestGradientChecks:
    def _check(self, fn, store):
        fn()
        return backprop_check(fn, store.params.values(), epsilon=1e-5)

    def test_softmax_attention_block(self):
        store = ParamStore(seed=0)
        x = nn.constant(np.random.default_rng(2).normal(size=(4, 6)))

        def loss():
            w = store.get("w", (6, 6))
            att = nn.softmax_rows((x @ w) @ x.T)
            return nn.tsum(att @ (x @ store.get("v", (6, 6))))

        assert self._check(loss, store) < 1e-4

    def test_layer_norm_block(self):
        store = ParamStore(seed=1)
        x = nn.constant(np.random.default_rng(3).normal(size=(3, 5)))

        def loss():
            g = store.get("g", (5,))
            b = store.zeros("b", (5,))
            return nn.tsum(nn.layer_norm(x, g, b))

        assert self._check(loss, store) < 1e-4

    def test_log_softmax_loss(self):
        store = ParamStore(seed=2)
        x = nn.constant(np.array([0.3, -0.2, 0.9]))

        def loss():
            w = store.get("w", (3, 2))
            pick = np.array([0.0, -1.0])
            return nn.tsum(nn.log_softmax(x @ w) * nn.Tensor(pick))

        assert self._check(loss, store) < 1e-4


class TestOptimizer:
    def test_adam_minimizes_quadratic(self):
        store = ParamStore(seed=0)
        x = store.get("x", (4,))
        first = float((x.data**2).sum())
        opt = Adam(store, lr=0.05)
        for _ in range(200):
            store.zero_grad()
            nn.tsum(x * x).backward()
            opt.step()
        assert float((x.data**2).sum()) < first * 0.01

    def test_param_init_is_name_seeded(self):
        a = ParamStore(seed=0)
        b = ParamStore(seed=0)
        b.get("other", (2, 2))  # different creation order
        assert np.array_equal(a.get("w", (3, 3)).data, b.get("w", (3, 3)).data)
        assert not np.array_equal(
            a.get("w", (3, 3)).data, ParamStore(seed=1).get("w", (3, 3)).data
        )


class TestCheckpoint:
    def test_roundtrip_and_byte_determinism(self, tmp_path):
        state = {"b": np.arange(4.0).reshape(2, 2), "a": np.array([0.5])}
        p1, p2 = tmp_path / "c1.bin", tmp_path / "c2.bin"
        nn.save_checkpoint(str(p1), state, meta={"n": 1})
        nn.save_checkpoint(str(p2), state, meta={"n": 1})
        assert p1.read_bytes() == p2.read_bytes()
        loaded, meta = nn.load_checkpoint(str(p1))
        assert meta == {"n": 1}
        assert np.array_equal(loaded["b"], state["b"])

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b'{"format": "other"}\n')
        with pytest.raises(ValueError):
            nn.load_checkpoint(str(p))
