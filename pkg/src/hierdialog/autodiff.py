"""Minimal reverse-mode automatic differentiation over numpy arrays.

Each op computes its value eagerly and, when gradients are enabled, records
its parents and a closure that pushes the output gradient back to them.
``Tensor.backward`` walks the recorded graph in reverse topological order.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        # never in place: g may be shared with another parent or be a view
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior nodes do not keep their gradients
                    node.grad = None

    # operator sugar
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return add(self, neg(other))
    def __rsub__(self, other): return add(other, neg(self))
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)

    def reshape(self, *shape) -> "Tensor":
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def transpose(self, *axes) -> "Tensor":
        return transpose(self, axes)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    live = tuple(p for p in parents if p.requires_grad)
    if _grad_enabled and live:
        out.requires_grad = True
        out._parents = live
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: a._accumulate(-g))


def matmul(a, b) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim == 2 and a.ndim > 2:
        return _matmul_shared(a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def _matmul_shared(a: Tensor, b: Tensor) -> Tensor:
    """(..., n, k) @ (k, m) as one flat product; the weight gradient is a
    single GEMM instead of a stack of per-batch products summed afterwards."""
    lead = a.shape[:-1]
    flat = a.data.reshape(-1, a.shape[-1])

    def backward(g):
        g2 = g.reshape(-1, b.shape[1])
        if a.requires_grad:
            a._accumulate((g2 @ b.data.T).reshape(a.shape))
        if b.requires_grad:
            b._accumulate(flat.T @ g2)

    return _make((flat @ b.data).reshape(lead + (b.shape[1],)), (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: a._accumulate(g.reshape(a.shape)))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: a._accumulate(g.transpose(inverse)))


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0
    return _make(np.where(keep, a.data, 0.0), (a,), lambda g: a._accumulate(g * keep))


def total(a: Tensor) -> Tensor:
    return _make(np.asarray(a.data.sum()), (a,), lambda g: a._accumulate(np.broadcast_to(g, a.shape)))


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]``; gradients scatter-add back into the table."""
    ids = np.asarray(ids)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        table._accumulate(full)

    return _make(table.data[ids], (table,), backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        a._accumulate(p * (g - (g * p).sum(axis=-1, keepdims=True)))

    return _make(p, (a,), backward)


def masked_softmax(scores: Tensor, allow: np.ndarray) -> Tensor:
    """Attention softmax over (B, H, N, N) scores with a (B, N, N) allow-mask."""
    p = kernels.masked_softmax(scores.data, allow)

    def backward(g):
        scores._accumulate(kernels.masked_softmax_backward(p, g))

    return _make(p, (scores,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Layer norm over the last axis of ``x``."""
    shape = x.shape
    flat = x.data.reshape(-1, shape[-1])
    y, xhat, rstd = kernels.layer_norm(flat, gain.data, bias.data)

    def backward(g):
        dx, dgain, dbias = kernels.layer_norm_backward(g.reshape(flat.shape), xhat, rstd, gain.data)
        if x.requires_grad:
            x._accumulate(dx.reshape(shape))
        if gain.requires_grad:
            gain._accumulate(dgain)
        if bias.requires_grad:
            bias._accumulate(dbias)

    return _make(y.reshape(shape), (x, gain, bias), backward)


def row_normalize(a: Tensor) -> Tensor:
    """Divide each row (last axis) by its sum; rows must have positive sums."""
    s = a.data.sum(axis=-1, keepdims=True)
    out = a.data / s

    def backward(g):
        a._accumulate((g - (g * out).sum(axis=-1, keepdims=True)) / s)

    return _make(out, (a,), backward)


def cross_entropy(logits: Tensor, gold: np.ndarray) -> Tensor:
    """Mean over the batch of -log softmax(logits)[gold], max-subtracted."""
    gold = np.asarray(gold)
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=-1))
    rows = np.arange(len(gold))
    losses = logsumexp - z[rows, gold]

    def backward(g):
        p = np.exp(z - logsumexp[:, None])
        p[rows, gold] -= 1.0
        logits._accumulate(p * (g / len(gold)))

    return _make(np.asarray(losses.mean()), (logits,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)


def getitem(a: Tensor, key) -> Tensor:
    """Basic or advanced indexing; gradients scatter-add into the source."""

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        a._accumulate(full)

    return _make(a.data[key], (a,), backward)
