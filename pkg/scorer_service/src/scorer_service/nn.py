"""Minimal reverse-mode autodiff and optimizer for the transformer scorer.

Float64 throughout; every operation keeps a closure that routes the
incoming gradient to its parents.  Deliberately covers only what the
sequence-pair classifier needs.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Callable, Iterable

import numpy as np


class NnError(Exception):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.parents = parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.ndim != 0:
            raise NnError("backward() requires a scalar")
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
            for p in node.parents:
                if p.requires_grad:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.shape))

        out._backward = backward
        return out

    def __mul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.shape))

        out._backward = backward
        return out

    def __sub__(self, other):
        return self + (_as_tensor(other) * Tensor(-1.0))

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, parents=(self, other))
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                if a.data.ndim == 2 and b.data.ndim == 2:
                    a._accumulate(g @ b.data.T)
                elif a.data.ndim == 2 and b.data.ndim == 1:
                    a._accumulate(np.outer(g, b.data))
                elif a.data.ndim == 1 and b.data.ndim == 2:
                    a._accumulate(g @ b.data.T)
                else:
                    a._accumulate(g * b.data)
            if b.requires_grad:
                if a.data.ndim == 2 and b.data.ndim == 2:
                    b._accumulate(a.data.T @ g)
                elif a.data.ndim == 2 and b.data.ndim == 1:
                    b._accumulate(a.data.T @ g)
                elif a.data.ndim == 1 and b.data.ndim == 2:
                    b._accumulate(np.outer(a.data, g))
                else:
                    b._accumulate(g * a.data)

        out._backward = backward
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, parents=(self,))
        out._backward = lambda g: self._accumulate(g.T) if self.requires_grad else None
        return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def constant(data) -> Tensor:
    return Tensor(data)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), parents=(x,))
    out._backward = (
        lambda g: x._accumulate(g * (x.data > 0.0)) if x.requires_grad else None
    )
    return out


def tsum(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), parents=(x,))
    out._backward = (
        lambda g: x._accumulate(np.full_like(x.data, float(g))) if x.requires_grad else None
    )
    return out


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(x.data[idx], parents=(x,))

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, idx, g)
            x._accumulate(acc)

    out._backward = backward
    return out


def softmax_rows(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, parents=(x,))

    def backward(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=-1, keepdims=True)
            x._accumulate(y * (g - dot))

    out._backward = backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    std = np.sqrt(var + eps)
    xhat = (x.data - mu) / std
    out = Tensor(xhat * gamma.data + beta.data, parents=(x, gamma, beta))
    d = x.data.shape[-1]

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(_unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta._accumulate(_unbroadcast(g, beta.shape))
        if x.requires_grad:
            dxhat = g * gamma.data
            x._accumulate(
                (
                    dxhat
                    - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
                )
                / std
            )

    out._backward = backward
    return out


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max()
    lse = np.log(np.exp(shifted).sum())
    y = shifted - lse
    out = Tensor(y, parents=(x,))

    def backward(g):
        if x.requires_grad:
            x._accumulate(g - np.exp(y) * g.sum())

    out._backward = backward
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    if rng is None or p <= 0.0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * Tensor(mask)


class ParamStore:
    """Named float64 parameters with seeded creation-order-independent
    initialization."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.params: dict[str, Tensor] = {}

    def get(self, name: str, shape: tuple[int, ...]) -> Tensor:
        if name not in self.params:
            key = (zlib.crc32(name.encode("utf-8")) ^ self.seed) & 0xFFFFFFFF
            rng = np.random.default_rng(key)
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            data = rng.normal(0.0, 1.0 / np.sqrt(fan_in), shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)
        return self.params[name]

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        if name not in self.params:
            self.params[name] = Tensor(np.zeros(shape), requires_grad=True, name=name)
        return self.params[name]

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for k, arr in state.items():
            self.params[k] = Tensor(arr.copy(), requires_grad=True, name=k)


class Adam:
    def __init__(self, store: ParamStore, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, clip=1.0):
        self.store = store
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.clip = clip
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self):
        grads = {
            k: p.grad for k, p in self.store.params.items() if p.grad is not None
        }
        if not grads:
            return
        if self.clip:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > self.clip:
                scale = self.clip / norm
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        for k, g in sorted(grads.items()):
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m[...] = self.b1 * m + (1 - self.b1) * g
            v[...] = self.b2 * v + (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            self.store.params[k].data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


CHECKPOINT_MAGIC = "scorer-service-checkpoint-v1"


def save_checkpoint(path: str, state: dict[str, np.ndarray], meta: dict | None = None):
    names = sorted(state)
    manifest = {
        "format": CHECKPOINT_MAGIC,
        "meta": meta or {},
        "arrays": [{"name": n, "shape": list(state[n].shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(manifest, sort_keys=True) + "\n").encode("utf-8"))
        for n in names:
            arr = np.ascontiguousarray(state[n], dtype=np.float64)
            fh.write(struct.pack("<q", arr.size))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        manifest = json.loads(fh.readline().decode("utf-8"))
        if manifest.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"not a scorer-service checkpoint: {path}")
        state = {}
        for spec in manifest["arrays"]:
            (size,) = struct.unpack("<q", fh.read(8))
            data = np.frombuffer(fh.read(8 * size), dtype="<f8")
            state[spec["name"]] = data.reshape(spec["shape"]).copy()
    return state, manifest["meta"]


def backprop_check(loss_fn, params: Iterable[Tensor], epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    params = list(params)
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, grad in zip(params, analytic):
        if grad is None:
            continue
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = float(loss_fn().data)
            flat[i] = orig - epsilon
            lo = float(loss_fn().data)
            flat[i] = orig
            fd = (hi - lo) / (2 * epsilon)
            denom = max(abs(fd), abs(gflat[i]), 1e-6)
            worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst
