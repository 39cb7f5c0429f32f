import numpy as np
import pytest

from deskasr import tensor as T
from deskasr.tensor import Tensor, gradcheck


def test_matmul_of_ones():
    a = Tensor(np.ones((2, 3)))
    b = Tensor(np.ones((3, 1)))
    out = a @ b
    assert out.shape == (2, 1)
    np.testing.assert_array_equal(out.data, np.full((2, 1), 3.0))


def test_log_softmax_symmetry():
    out = T.log_softmax(Tensor([[0.0, 0.0]]))
    np.testing.assert_allclose(out.data, np.log(0.5) * np.ones((1, 2)), atol=1e-12)


def test_relu_definition():
    out = T.relu(Tensor([-1.0, 2.0]))
    np.testing.assert_array_equal(out.data, [0.0, 2.0])


def test_log_softmax_rows_normalize():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(5, 7)) * 10)
    out = T.log_softmax(x)
    np.testing.assert_allclose(np.exp(out.data).sum(axis=-1), 1.0, atol=1e-9)


def test_backward_square_sum():
    w = Tensor([1.0, -2.0], requires_grad=True)
    loss = (w * w).sum()
    loss.backward()
    np.testing.assert_allclose(w.grad, [2.0, -4.0])


def test_backward_sigmoid_at_zero():
    x = Tensor(0.0, requires_grad=True)
    out = T.sigmoid(x)
    out.backward()
    np.testing.assert_allclose(x.grad, 0.25)


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * x).backward()


def test_matmul_shape_mismatch_names_op():
    with pytest.raises(T.ShapeError, match="matmul"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_gradcheck_linear_is_exact():
    rng = np.random.default_rng(1)
    w = Tensor(rng.normal(size=(1, 4)), requires_grad=True)
    x = Tensor(rng.normal(size=(4, 1)))
    err = gradcheck(lambda: (w @ x).sum(), {"w": w})
    assert err < 1e-10


def _lstm_step(params, x, h, c):
    z = x @ T.transpose(params["w_x"]) + h @ T.transpose(params["w_h"]) + params["b"]
    H = h.shape[-1]
    i = T.sigmoid(z[:, :H])
    f = T.sigmoid(z[:, H : 2 * H])
    g = T.tanh(z[:, 2 * H : 3 * H])
    o = T.sigmoid(z[:, 3 * H :])
    c2 = f * c + i * g
    return o * T.tanh(c2), c2


def test_gradcheck_lstm_step():
    rng = np.random.default_rng(2)
    H, I = 3, 4
    params = {
        "w_x": Tensor(rng.normal(size=(4 * H, I)) * 0.5, requires_grad=True),
        "w_h": Tensor(rng.normal(size=(4 * H, H)) * 0.5, requires_grad=True),
        "b": Tensor(rng.normal(size=(4 * H,)) * 0.5, requires_grad=True),
    }
    x = Tensor(rng.normal(size=(2, I)))
    h0 = Tensor(rng.normal(size=(2, H)))
    c0 = Tensor(rng.normal(size=(2, H)))

    def loss():
        h, c = _lstm_step(params, x, h0, c0)
        return (h * h).sum() + c.sum()

    assert gradcheck(loss, params, step=1e-5) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_gradcheck_core_ops(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    bias = Tensor(rng.normal(size=(2,)), requires_grad=True)

    def loss():
        y = T.tanh(a @ b + bias)
        z = T.log_softmax(y, axis=-1)
        p = T.softmax(y, axis=-1)
        mixed = T.concat([z, p], axis=1)
        picked = mixed[:, 1:3]
        return (T.relu(picked) * 0.5).mean() + T.sigmoid(picked).sum()

    err = gradcheck(loss, {"a": a, "b": b, "bias": bias}, step=1e-5)
    assert err < 1e-4


def test_gradcheck_conv_pool():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(2, 1, 5, 4)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 1, 3, 3)) * 0.5, requires_grad=True)
    bias = Tensor(rng.normal(size=(3,)), requires_grad=True)

    def loss():
        y = T.relu(T.conv2d(x, w, bias, pad=(1, 1)))
        p = T.max_pool2x2(y)
        return (p * p).mean()

    err = gradcheck(loss, {"x": x, "w": w, "b": bias}, step=1e-5)
    assert err < 1e-4


def test_gradcheck_embedding_take():
    rng = np.random.default_rng(4)
    emb = Tensor(rng.normal(size=(6, 3)), requires_grad=True)
    idx = np.array([0, 2, 2, 5])
    tgt = np.array([1, 0, 2, 1])

    def loss():
        rows = T.embedding(emb, idx)
        lp = T.log_softmax(rows, axis=-1)
        return -T.take_last(lp, tgt).mean()

    assert gradcheck(loss, {"emb": emb}, step=1e-5) < 1e-4


def test_pool_ceil_shapes():
    x = Tensor(np.arange(2 * 1 * 5 * 3, dtype=float).reshape(2, 1, 5, 3))
    out = T.max_pool2x2(x)
    assert out.shape == (2, 1, 3, 2)


def test_forward_determinism():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 4))
    a = T.tanh(Tensor(x) @ Tensor(x))
    b = T.tanh(Tensor(x) @ Tensor(x))
    assert np.array_equal(a.data, b.data)


def test_dropout_seeded_and_disabled():
    x = Tensor(np.ones((3, 3)))
    out1 = T.dropout(x, 0.5, np.random.default_rng(7), training=True)
    out2 = T.dropout(x, 0.5, np.random.default_rng(7), training=True)
    assert np.array_equal(out1.data, out2.data)
    assert set(np.unique(out1.data)) <= {0.0, 2.0}
    eval_out = T.dropout(x, 0.5, np.random.default_rng(7), training=False)
    assert np.array_equal(eval_out.data, x.data)


def test_no_grad_blocks_graph():
    w = Tensor([1.0, 2.0], requires_grad=True)
    with T.no_grad():
        out = (w * w).sum()
    assert not out.requires_grad
    assert out._backward is None


def test_shared_subgraph_accumulates():
    # y used twice: dL/dw must include both paths
    w = Tensor([[2.0]], requires_grad=True)
    y = w @ Tensor([[3.0]])
    loss = (y * y).sum() + y.sum()
    loss.backward()
    # L = (3w)^2 + 3w -> dL/dw = 18w + 3 = 39
    np.testing.assert_allclose(w.grad, [[39.0]])
