"""Transformer sequence-pair classifier.

The question and candidate are concatenated with separator tokens and a
leading classification token; the final hidden vector of that token (C)
is multiplied by the classification weights W, and log(softmax(C W^T))
gives the training loss.  The served score is the positive-class softmax
probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .nn import ParamStore, Tensor
from .tokenizer import Tokenizer


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 32
    heads: int = 2
    layers: int = 2
    ffn_dim: int = 64
    max_len: int = 64
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError("dim must be divisible by heads")


class TransformerScorer:
    def __init__(self, config: ModelConfig, tokenizer: Tokenizer):
        self.config = config
        self.tokenizer = tokenizer
        self.store = ParamStore(seed=config.seed)
        # Materialize all parameters up front so checkpoints are complete.
        c = config
        v = len(tokenizer.vocab)
        self.store.get("emb.tok", (v, c.dim))
        self.store.get("emb.pos", (c.max_len, c.dim))
        for l in range(c.layers):
            for name in ("q", "k", "v", "o"):
                self.store.get(f"l{l}.att.{name}", (c.dim, c.dim))
            self.store.get(f"l{l}.ffn.w1", (c.dim, c.ffn_dim))
            self.store.zeros(f"l{l}.ffn.b1", (c.ffn_dim,))
            self.store.get(f"l{l}.ffn.w2", (c.ffn_dim, c.dim))
            self.store.zeros(f"l{l}.ffn.b2", (c.dim,))
            for ln in ("ln1", "ln2"):
                self.store.params.setdefault(
                    f"l{l}.{ln}.g", Tensor(np.ones(c.dim), requires_grad=True)
                )
                self.store.zeros(f"l{l}.{ln}.b", (c.dim,))
        self.store.get("cls.w", (c.dim, 2))
        self.store.zeros("cls.b", (2,))

    def _attention(self, x: Tensor, layer: int, rng) -> Tensor:
        c = self.config
        d_head = c.dim // c.heads
        q = x @ self.store.params[f"l{layer}.att.q"]
        k = x @ self.store.params[f"l{layer}.att.k"]
        v = x @ self.store.params[f"l{layer}.att.v"]
        heads = []
        for h in range(c.heads):
            sl = np.arange(h * d_head, (h + 1) * d_head)
            qh = _cols(q, sl)
            kh = _cols(k, sl)
            vh = _cols(v, sl)
            scores = (qh @ kh.T) * nn.Tensor(1.0 / np.sqrt(d_head))
            att = nn.softmax_rows(scores)
            att = nn.dropout(att, c.dropout, rng)
            heads.append(att @ vh)
        cat = _hconcat(heads)
        return cat @ self.store.params[f"l{layer}.att.o"]

    def hidden_states(self, token_ids: list[int], rng=None) -> Tensor:
        c = self.config
        ids = np.asarray(token_ids[: c.max_len], dtype=np.intp)
        tok = nn.gather_rows(self.store.params["emb.tok"], ids)
        pos = nn.gather_rows(self.store.params["emb.pos"], np.arange(len(ids)))
        x = nn.dropout(tok + pos, c.dropout, rng)
        for l in range(c.layers):
            att = self._attention(x, l, rng)
            x = nn.layer_norm(
                x + nn.dropout(att, c.dropout, rng),
                self.store.params[f"l{l}.ln1.g"],
                self.store.params[f"l{l}.ln1.b"],
            )
            h = nn.relu(
                x @ self.store.params[f"l{l}.ffn.w1"]
                + self.store.params[f"l{l}.ffn.b1"]
            )
            h = h @ self.store.params[f"l{l}.ffn.w2"] + self.store.params[f"l{l}.ffn.b2"]
            x = nn.layer_norm(
                x + nn.dropout(h, c.dropout, rng),
                self.store.params[f"l{l}.ln2.g"],
                self.store.params[f"l{l}.ln2.b"],
            )
        return x

    def logits(self, token_ids: list[int], rng=None) -> Tensor:
        x = self.hidden_states(token_ids, rng)
        pooled = nn.gather_rows(x, np.array([0]))  # [CLS] position
        out = pooled @ self.store.params["cls.w"] + self.store.params["cls.b"]
        return nn.gather_rows(out, np.array([0]))  # 1x2 -> flatten below

    def loss(self, token_ids: list[int], label: int, rng=None) -> Tensor:
        logits = _row0(self.logits(token_ids, rng))
        logp = nn.log_softmax(logits)
        pick = np.zeros(2)
        pick[label] = -1.0
        return nn.tsum(logp * nn.Tensor(pick))

    def score(self, question: str, candidate: str) -> float:
        ids = self.tokenizer.encode_pair(question, candidate, self.config.max_len)
        logits = _row0(self.logits(ids, rng=None)).data
        shifted = logits - logits.max()
        e = np.exp(shifted)
        return float(e[1] / e.sum())

    def save(self, path: str):
        nn.save_checkpoint(
            path,
            self.store.state_dict(),
            meta={"config": asdict(self.config), "vocab": list(self.tokenizer.vocab)},
        )

    @classmethod
    def load(cls, path: str) -> "TransformerScorer":
        state, meta = nn.load_checkpoint(path)
        model = cls(ModelConfig(**meta["config"]), Tokenizer(tuple(meta["vocab"])))
        model.store.load_state_dict(state)
        return model


def _cols(x: Tensor, idx: np.ndarray) -> Tensor:
    out = Tensor(x.data[:, idx], parents=(x,))

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            acc[:, idx] = g
            x._accumulate(acc)

    out._backward = backward
    return out


def _hconcat(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), parents=tuple(parts))
    widths = [p.data.shape[1] for p in parts]

    def backward(g):
        start = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accumulate(g[:, start : start + w])
            start += w

    out._backward = backward
    return out


def _row0(x: Tensor) -> Tensor:
    out = Tensor(x.data[0], parents=(x,))

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            acc[0] = g
            x._accumulate(acc)

    out._backward = backward
    return out
