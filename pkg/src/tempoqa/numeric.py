"""Numeric building blocks: parameter store, feed-forward and LSTM layers,
sinusoidal time encoding, Personalized PageRank, gradient checking, Adam,
and a deterministic checkpoint format.
"""

from __future__ import annotations

import json
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError, Tensor
from .kg import Timestamp

DEFAULT_TIME_EPOCH = 1000


class ParamStore:
    """Named trainable tensors with seeded initialization."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}

    def get(self, name: str, shape: tuple[int, ...], scale: float | None = None) -> Tensor:
        if name not in self.params:
            if scale is None:
                fan_in = shape[0] if shape else 1
                scale = 1.0 / math.sqrt(max(fan_in, 1))
            data = self.rng.uniform(-scale, scale, size=shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)
        return self.params[name]

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        if name not in self.params:
            self.params[name] = Tensor(np.zeros(shape), requires_grad=True, name=name)
        return self.params[name]

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in sorted(self.params.items())}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, value in state.items():
            self.params[name] = Tensor(value, requires_grad=True, name=name)


# -- layers ---------------------------------------------------------------


def ffn(
    x: Tensor,
    store: ParamStore,
    prefix: str,
    out_dim: int,
    activation: Callable[[Tensor], Tensor] | None = ad.relu,
) -> Tensor:
    """Single affine layer with optional nonlinearity; works on vectors and
    row-matrices alike."""
    in_dim = x.shape[-1]
    w = store.get(f"{prefix}.w", (in_dim, out_dim))
    b = store.zeros(f"{prefix}.b", (out_dim,))
    y = x @ w + b
    return activation(y) if activation is not None else y


def lstm_cell(
    x: Tensor, h: Tensor, c: Tensor, store: ParamStore, prefix: str, hidden: int
) -> tuple[Tensor, Tensor]:
    in_dim = x.shape[-1]
    wx = store.get(f"{prefix}.wx", (in_dim, 4 * hidden))
    wh = store.get(f"{prefix}.wh", (hidden, 4 * hidden))
    b = store.zeros(f"{prefix}.b", (4 * hidden,))
    z = x @ wx + h @ wh + b
    i_gate = ad.sigmoid(_slice(z, 0, hidden))
    f_gate = ad.sigmoid(_slice(z, hidden, 2 * hidden))
    g_gate = ad.tanh(_slice(z, 2 * hidden, 3 * hidden))
    o_gate = ad.sigmoid(_slice(z, 3 * hidden, 4 * hidden))
    c_new = f_gate * c + i_gate * g_gate
    h_new = o_gate * ad.tanh(c_new)
    return h_new, c_new


def _slice(x: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(x.data[..., lo:hi], parents=(x,))

    def bw(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[..., lo:hi] = g
            x._accumulate(full)

    out._backward = bw
    return out


def lstm_encode(
    seq: Sequence[Tensor], store: ParamStore, prefix: str, hidden: int
) -> Tensor:
    """Final hidden state of an LSTM run over the sequence from zero state."""
    if not seq:
        return ad.constant(np.zeros(hidden))
    h = ad.constant(np.zeros(hidden))
    c = ad.constant(np.zeros(hidden))
    for x in seq:
        h, c = lstm_cell(x, h, c, store, prefix, hidden)
    return h


# -- time encoding --------------------------------------------------------


def time_encode_position(k: float, d: int) -> np.ndarray:
    if d % 2 != 0 or d < 2:
        raise ValueError("time encoding dimension must be even and >= 2")
    i = np.arange(d // 2)
    angles = k / (10000.0 ** (2.0 * i / d))
    enc = np.empty(d)
    enc[0::2] = np.sin(angles)
    enc[1::2] = np.cos(angles)
    return enc


def time_encode(ts: Timestamp, d: int, epoch: int = DEFAULT_TIME_EPOCH) -> np.ndarray:
    """Sum of sinusoidal encodings of the present positions (year index,
    month, day)."""
    positions = [float(ts.year - epoch)]
    if ts.month is not None:
        positions.append(float(ts.month))
    if ts.day is not None:
        positions.append(float(ts.day))
    out = np.zeros(d)
    for k in positions:
        out += time_encode_position(k, d)
    return out


# -- Personalized PageRank ------------------------------------------------


def ppr(
    adjacency: dict[str, Iterable[str]],
    seeds: Iterable[str],
    alpha: float = 0.15,
    tol: float = 1e-12,
    max_iter: int = 100000,
) -> dict[str, float]:
    """Power iteration with restart mass `alpha` on the uniform seed
    distribution; dangling mass restarts.  Scores sum to 1."""
    nodes = sorted(adjacency)
    index = {n: i for i, n in enumerate(nodes)}
    seeds = sorted(set(seeds))
    if not seeds:
        raise ValueError("seeds must be nonempty")
    for s in seeds:
        if s not in index:
            raise ValueError(f"seed {s} not in graph")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")

    n = len(nodes)
    restart = np.zeros(n)
    for s in seeds:
        restart[index[s]] = 1.0 / len(seeds)

    out_edges = [[index[t] for t in sorted(set(adjacency[node]))] for node in nodes]
    x = restart.copy()
    for _ in range(max_iter):
        nxt = alpha * restart
        for i, targets in enumerate(out_edges):
            if targets:
                share = (1.0 - alpha) * x[i] / len(targets)
                for t in targets:
                    nxt[t] += share
            else:
                nxt += (1.0 - alpha) * x[i] * restart
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    return {node: float(x[i]) for node, i in index.items()}


# -- gradient checking ----------------------------------------------------


def backprop_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central finite-difference
    gradients over all given parameters."""
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.all(np.isfinite(loss.data)):
        raise NumericError("non-finite loss")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    max_err = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = float(loss_fn().data)
            flat[j] = orig - epsilon
            down = float(loss_fn().data)
            flat[j] = orig
            fd = (up - down) / (2.0 * epsilon)
            a = grad.reshape(-1)[j]
            # The floor keeps finite-difference roundoff on near-zero
            # gradients from registering as large relative error.
            denom = max(abs(a) + abs(fd), 1e-6)
            max_err = max(max_err, abs(a - fd) / denom)
    return max_err


# -- optimizer ------------------------------------------------------------


class Adam:
    def __init__(self, store: ParamStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip: float | None = 1.0):
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip = clip
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self):
        self.t += 1
        if self.clip is not None:
            total = 0.0
            for p in self.store.params.values():
                if p.grad is not None:
                    total += float((p.grad**2).sum())
            norm = math.sqrt(total)
            scale = self.clip / norm if norm > self.clip else 1.0
        else:
            scale = 1.0
        for name in sorted(self.store.params):
            p = self.store.params[name]
            if p.grad is None:
                continue
            g = p.grad * scale
            m = self.m.setdefault(name, np.zeros_like(p.data))
            v = self.v.setdefault(name, np.zeros_like(p.data))
            m[:] = self.beta1 * m + (1 - self.beta1) * g
            v[:] = self.beta2 * v + (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


# -- checkpoint format ----------------------------------------------------

CHECKPOINT_MAGIC = "tempoqa-checkpoint-v1"


def save_checkpoint(path: str, state: dict[str, np.ndarray], meta: dict | None = None):
    """Deterministic binary dump: JSON manifest line + little-endian float64
    blobs in manifest order."""
    names = sorted(state)
    manifest = {
        "format": CHECKPOINT_MAGIC,
        "meta": meta or {},
        "tensors": [{"name": n, "shape": list(state[n].shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(manifest, sort_keys=True) + "\n").encode("utf-8"))
        for n in names:
            fh.write(np.ascontiguousarray(state[n], dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8")
        manifest = json.loads(header)
        if manifest.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        state = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            state[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return state, manifest.get("meta", {})
