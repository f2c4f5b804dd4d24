"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Covers exactly the operations the model needs: affine maps, elementwise
nonlinearities, concatenation, row gather/scatter and reductions.  Tensors
are immutable during the forward pass; gradients accumulate on backward().
"""

from __future__ import annotations

import numpy as np


class NumericError(Exception):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self):
        if self.data.size != 1:
            raise NumericError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        out._backward = bw
        return out

    def __sub__(self, other):
        return self + (_wrap(other) * -1.0)

    def __mul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        out._backward = bw
        return out

    __rmul__ = __mul__
    __radd__ = __add__

    def __truediv__(self, other):
        other = _wrap(other)
        out = Tensor(self.data / other.data, parents=(self, other))

        def bw(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g / other.data, self.shape))
            if other.requires_grad:
                other._accumulate(
                    _unbroadcast(-g * self.data / (other.data**2), other.shape)
                )

        out._backward = bw
        return out

    def __matmul__(self, other):
        other = _wrap(other)
        out = Tensor(self.data @ other.data, parents=(self, other))

        def bw(g):
            a, b = self.data, other.data
            if self.requires_grad:
                if a.ndim == 1 and b.ndim == 2:  # (d,) @ (d,h)
                    self._accumulate(g @ b.T)
                elif a.ndim == 2 and b.ndim == 1:  # (n,d) @ (d,)
                    self._accumulate(np.outer(g, b))
                elif a.ndim == 1 and b.ndim == 1:  # dot
                    self._accumulate(g * b)
                else:  # (n,d) @ (d,h)
                    self._accumulate(g @ b.T)
            if other.requires_grad:
                if a.ndim == 1 and b.ndim == 2:
                    other._accumulate(np.outer(a, g))
                elif a.ndim == 2 and b.ndim == 1:
                    other._accumulate(a.T @ g)
                elif a.ndim == 1 and b.ndim == 1:
                    other._accumulate(g * a)
                else:
                    other._accumulate(a.T @ g)

        out._backward = bw
        return out


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def constant(x) -> Tensor:
    return _wrap(x)


# -- nonlinearities -------------------------------------------------------


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, parents=(x,))
    out._backward = lambda g: x._accumulate(g * (1.0 - y**2))
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), parents=(x,))
    out._backward = lambda g: x._accumulate(g * (x.data > 0.0))
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(y, parents=(x,))
    out._backward = lambda g: x._accumulate(g * y * (1.0 - y))
    return out


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    out = Tensor(y, parents=(x,))
    out._backward = lambda g: x._accumulate(g * y)
    return out


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), parents=(x,))
    out._backward = lambda g: x._accumulate(g / x.data)
    return out


# -- shape ops ------------------------------------------------------------


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), parents=tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accumulate(g[tuple(idx)])

    out._backward = bw
    return out


def stack_rows(rows: list[Tensor]) -> Tensor:
    out = Tensor(np.stack([r.data for r in rows]), parents=tuple(rows))

    def bw(g):
        for i, r in enumerate(rows):
            if r.requires_grad:
                r._accumulate(g[i])

    out._backward = bw
    return out


def gather_rows(m: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(m.data[idx], parents=(m,))

    def bw(g):
        if m.requires_grad:
            acc = np.zeros_like(m.data)
            np.add.at(acc, idx, g)
            m._accumulate(acc)

    out._backward = bw
    return out


def scatter_sum(m: Tensor, idx, n_rows: int) -> Tensor:
    """Rows of m summed into n_rows buckets given by idx."""
    idx = np.asarray(idx, dtype=np.intp)
    data = np.zeros((n_rows,) + m.data.shape[1:])
    np.add.at(data, idx, m.data)
    out = Tensor(data, parents=(m,))
    out._backward = lambda g: m._accumulate(g[idx]) if m.requires_grad else None
    return out


def repeat_row(v: Tensor, n: int) -> Tensor:
    out = Tensor(np.tile(v.data, (n, 1)), parents=(v,))
    out._backward = lambda g: v._accumulate(g.sum(axis=0)) if v.requires_grad else None
    return out


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), parents=(x,))

    def bw(g):
        if not x.requires_grad:
            return
        if axis is None:
            x._accumulate(np.broadcast_to(g, x.shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            x._accumulate(np.broadcast_to(ge, x.shape).copy())

    out._backward = bw
    return out


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis; sums to 1 along that axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, parents=(x,))

    def bw(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            x._accumulate(y * (g - dot))

    out._backward = bw
    return out


def check_finite(x: Tensor, context: str = "") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"non-finite values{' in ' + context if context else ''}")
    return x
