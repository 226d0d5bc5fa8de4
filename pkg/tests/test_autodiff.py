import numpy as np
import pytest

from hierdialog import autodiff as ad
from hierdialog.autodiff import Tensor


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x.data)
    for idx in np.ndindex(*x.shape):
        orig = x.data[idx]
        x.data[idx] = orig + eps
        up = f()
        x.data[idx] = orig - eps
        down = f()
        x.data[idx] = orig
        g[idx] = (up - down) / (2 * eps)
    return g


def check(build, *shapes, seed=0):
    rng = np.random.default_rng(seed)
    xs = [Tensor(rng.normal(size=s), requires_grad=True) for s in shapes]
    weights = None

    def scalar():
        nonlocal weights
        out = build(*xs)
        if weights is None:
            weights = rng.normal(size=out.shape)
        return out, float((out.data * weights).sum())

    out, _ = scalar()
    out.backward(weights)
    for x in xs:
        num = numeric_grad(lambda: scalar()[1], x)
        assert np.allclose(x.grad, num, rtol=1e-5, atol=1e-7)


def test_add_broadcast():
    check(lambda a, b: a + b, (3, 4), (4,))


def test_sub_mul():
    check(lambda a, b: (a - b) * a, (2, 3), (2, 3))


def test_matmul_batched():
    check(lambda a, b: a @ b, (2, 3, 4), (2, 4, 5))


def test_matmul_shared_weight():
    check(lambda a, b: a @ b, (2, 3, 4), (4, 5))


def test_matmul_broadcast_left():
    check(lambda a, b: a @ b, (3, 4), (2, 4, 5))


def test_reshape_transpose():
    check(lambda a: a.reshape(3, 2, 2).transpose(2, 0, 1), (3, 4))


def test_relu():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(4, 5)) + np.sign(rng.normal(size=(4, 5))) * 0.1, requires_grad=True)
    y = ad.relu(x)
    y.backward(np.ones(y.shape))
    assert (x.grad == (x.data > 0)).all()


def test_softmax():
    check(ad.softmax, (3, 5))


def test_masked_softmax():
    allow = np.random.default_rng(1).random((2, 4, 4)) < 0.7
    allow[:, np.arange(4), np.arange(4)] = True
    check(lambda s: ad.masked_softmax(s, allow), (2, 3, 4, 4))


def test_layer_norm():
    check(ad.layer_norm, (2, 3, 6), (6,), (6,))


def test_row_normalize():
    rng = np.random.default_rng(0)
    a = Tensor(rng.random((3, 4)) + 0.5, requires_grad=True)
    w = rng.normal(size=(3, 4))
    out = ad.row_normalize(a)
    out.backward(w)
    num = numeric_grad(lambda: float((ad.row_normalize(a).data * w).sum()), a)
    assert np.allclose(a.grad, num, atol=1e-7)


def test_embedding_scatter_adds_repeats():
    table = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)
    out = ad.embedding(table, np.array([[1, 1, 3]]))
    out.backward(np.ones(out.shape))
    assert table.grad.tolist() == [[0, 0, 0], [2, 2, 2], [0, 0, 0], [1, 1, 1]]


def test_getitem():
    check(lambda a: ad.getitem(a, (slice(None), 1)), (2, 3, 4))


def test_cross_entropy_uniform_and_grad():
    logits = Tensor(np.zeros((2, 4)), requires_grad=True)
    loss = ad.cross_entropy(logits, np.array([0, 3]))
    assert float(loss.data) == pytest.approx(np.log(4))
    check(lambda z: ad.cross_entropy(z, np.array([2, 0, 1])), (3, 4))


def test_cross_entropy_batch_mean_matches_scalar_oracle():
    rows = np.array([[1.0, 2.0, 0.5], [-3.0, 0.0, 3.0], [10.0, 10.0, -10.0]])
    gold = np.array([1, 0, 2])
    oracle = np.mean([-np.log(np.exp(r[g]) / np.exp(r).sum()) for r, g in zip(rows, gold)])
    assert float(ad.cross_entropy(Tensor(rows), gold).data) == pytest.approx(oracle, rel=1e-12)


def test_shared_subexpression_accumulates():
    x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
    y = x * x + x
    y.backward(np.ones(2))
    assert x.grad.tolist() == [5.0, -1.0]


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert not y.requires_grad and y._parents == ()


def test_backward_needs_scalar_or_seed():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_dropout_identity_without_rng():
    x = Tensor(np.ones(5))
    assert ad.dropout(x, 0.5, None) is x
    y = ad.dropout(x, 0.5, np.random.default_rng(0))
    assert set(np.unique(y.data)) <= {0.0, 2.0}
