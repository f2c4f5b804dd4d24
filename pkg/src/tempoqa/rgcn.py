"""Stage-2 answer prediction: a relational graph convolutional network with
time-aware entity embeddings, attention over temporal relations and
Personalized-PageRank-gated propagation.

The relational graph is built from the answer graph by reification: each
n-ary fact becomes subject->object and subject->qualifier-object edges with
composite relation labels; inverse edges carry a distinct suffix.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .answer_graph import AnswerGraph
from .autodiff import Tensor
from .kg import Fact, KnowledgeGraph, Timestamp, is_temporal_fact
from .numeric import Adam, ParamStore, ffn, lstm_cell, lstm_encode, ppr, time_encode
from .question import QuestionAnalysis

INVERSE_SUFFIX = "~inv"
CANDIDATE_KINDS = ("entity", "literal", "timestamp")


@dataclass(frozen=True)
class RelEdge:
    src: str
    dst: str
    relation: str  # relation label key, embedding lookup
    words: tuple[str, ...]  # relation words, averaged for the embedding
    timestamp: Timestamp | None
    fact_id: str


@dataclass(frozen=True)
class TemporalFactRef:
    """A temporal fact attached to a node, as seen by the TEE encoder."""

    fact_id: str
    entity_ids: tuple[str, ...]  # constituent non-predicate items present as nodes
    words: tuple[str, ...]  # relation words (main + qualifier predicates)
    timestamps: tuple[Timestamp, ...]
    earliest: Timestamp


@dataclass
class RelationalGraph:
    nodes: list[str] = field(default_factory=list)  # item ids, sorted
    kinds: dict[str, str] = field(default_factory=dict)
    node_words: dict[str, tuple[str, ...]] = field(default_factory=dict)
    timestamps: dict[str, Timestamp] = field(default_factory=dict)
    edges: list[RelEdge] = field(default_factory=list)
    temporal: dict[str, tuple[TemporalFactRef, ...]] = field(default_factory=dict)

    def candidate_nodes(self) -> list[str]:
        return [n for n in self.nodes if self.kinds[n] in CANDIDATE_KINDS]


def _label_words(item) -> tuple[str, ...]:
    from .question import tokenize

    return tuple(tokenize(item.label)) or (item.id.lower(),)


def build_relational_graph(g: AnswerGraph, kg: KnowledgeGraph) -> RelationalGraph:
    if not g.nodes:
        raise ValueError("answer graph is empty")
    rg = RelationalGraph()
    node_ids: set[str] = set()
    fact_ids = sorted(g.fact_ids())
    facts = [kg.facts[fid] for fid in fact_ids]

    def add_node(item):
        node_ids.add(item.id)
        rg.kinds[item.id] = item.kind
        if item.kind == "timestamp":
            rg.timestamps[item.id] = item.timestamp
        else:
            rg.node_words[item.id] = _label_words(item)

    forward: list[RelEdge] = []
    for f in facts:
        all_ts = sorted(f.timestamps())
        fact_ts = all_ts[0] if all_ts else None
        add_node(f.subject)
        add_node(f.object)
        forward.append(
            RelEdge(
                src=f.subject.id,
                dst=f.object.id,
                relation=f.predicate.id,
                words=_label_words(f.predicate),
                timestamp=f.object.timestamp if f.object.kind == "timestamp" else fact_ts,
                fact_id=f.id,
            )
        )
        for qp, qo in f.qualifiers:
            add_node(qo)
            forward.append(
                RelEdge(
                    src=f.subject.id,
                    dst=qo.id,
                    relation=f"{f.predicate.id}/{qp.id}",
                    words=_label_words(f.predicate) + _label_words(qp),
                    timestamp=qo.timestamp if qo.kind == "timestamp" else fact_ts,
                    fact_id=f.id,
                )
            )

    edges = list(forward)
    for e in forward:
        edges.append(
            RelEdge(
                src=e.dst,
                dst=e.src,
                relation=e.relation + INVERSE_SUFFIX,
                words=e.words,
                timestamp=e.timestamp,
                fact_id=e.fact_id,
            )
        )
    rg.nodes = sorted(node_ids)
    rg.edges = sorted(
        edges, key=lambda e: (e.src, e.relation, e.dst, e.fact_id)
    )

    # Temporal facts per node: the node appears in any non-predicate position.
    per_node: dict[str, dict[str, TemporalFactRef]] = {}
    for f in facts:
        if not is_temporal_fact(f):
            continue
        constituents = tuple(
            sorted({it.id for it in [f.subject] + f.objects() if it.id in node_ids})
        )
        words: tuple[str, ...] = _label_words(f.predicate)
        for qp, _ in f.qualifiers:
            words += _label_words(qp)
        tss = tuple(sorted(f.timestamps()))
        ref = TemporalFactRef(f.id, constituents, words, tss, tss[0])
        for node in constituents:
            per_node.setdefault(node, {})[f.id] = ref
    for node, refs in per_node.items():
        rg.temporal[node] = tuple(
            sorted(refs.values(), key=lambda r: (r.earliest.sort_key(), r.fact_id))
        )
    return rg


@dataclass(frozen=True)
class QAExample:
    qa: QuestionAnalysis
    graph: RelationalGraph
    gold: frozenset[str]

    def labels(self) -> dict[str, int]:
        return {n: int(n in self.gold) for n in self.graph.candidate_nodes()}


@dataclass
class RGCNConfig:
    dim: int = 32  # hidden size == embedding size
    te_dim: int = 16
    layers: int = 3
    epochs: int = 100
    learning_rate: float = 1e-3
    lr_decay: float = 1.0  # per-epoch multiplicative decay
    batch_size: int = 25
    gradient_clip: float = 1.0
    lstm_dropout: float = 0.3
    linear_dropout: float = 0.2
    fact_dropout: float = 0.1
    max_temporal_facts: int = 8
    ppr_alpha: float = 0.15
    ppr_tol: float = 1e-10
    seed: int = 0
    ablations: frozenset[str] = frozenset()  # subset of {tce,tse,tee,te,atr}

    def ablated(self, name: str) -> bool:
        return name in self.ablations


class EmbeddingTables:
    """Seeded trainable embedding tables with per-key deterministic fallback.

    Vectors for unseen keys are drawn from a per-key seeded stream, so lookup
    results do not depend on creation order.  An optional text file of
    pretrained vectors ("token v1 v2 ... vd" per line) overrides the fallback.
    """

    def __init__(self, store: ParamStore, dim: int, seed: int = 0):
        self.store = store
        self.dim = dim
        self.seed = seed
        self.pretrained: dict[str, np.ndarray] = {}

    def load_pretrained(self, path: str, prefix: str = "word"):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != self.dim + 1:
                    continue
                self.pretrained[f"{prefix}:{parts[0]}"] = np.array(
                    [float(v) for v in parts[1:]]
                )

    def _vector(self, name: str, key: str) -> Tensor:
        if name not in self.store.params:
            if key in self.pretrained:
                data = self.pretrained[key].copy()
            else:
                key_seed = (zlib.crc32(key.encode("utf-8")) ^ self.seed) & 0xFFFFFFFF
                rng = np.random.default_rng(key_seed)
                data = rng.uniform(-1.0, 1.0, self.dim) / np.sqrt(self.dim)
            self.store.params[name] = Tensor(data, requires_grad=True, name=name)
        return self.store.params[name]

    def word(self, token: str) -> Tensor:
        return self._vector(f"emb.word.{token}", f"word:{token}")

    def entity(self, item_id: str, words: Sequence[str] | None = None) -> Tensor:
        """Entity vector x_e.

        When the entity's label words are supplied and no dedicated vector
        exists (loaded from file or already materialized), x_e is the average
        of the label-word vectors.  Sharing the word table keeps entity and
        word representations in one space, standing in for jointly pre-trained
        word/entity embeddings.
        """
        name = f"emb.ent.{item_id}"
        if words and name not in self.store.params and f"ent:{item_id}" not in self.pretrained:
            return self.word_average(words)
        return self._vector(name, f"ent:{item_id}")

    def word_average(self, words: Sequence[str]) -> Tensor:
        vecs = [self.word(w) for w in words]
        total = vecs[0]
        for v in vecs[1:]:
            total = total + v
        return total * (1.0 / len(vecs))

    def relation(self, words: Sequence[str]) -> Tensor:
        """Average of the relation's word vectors."""
        return self.word_average(words)


class Model:
    """Owns parameters and runs the per-question forward pass."""

    def __init__(self, config: RGCNConfig):
        self.config = config
        self.store = ParamStore(seed=config.seed)
        self.tables = EmbeddingTables(self.store, config.dim, seed=config.seed)
        self._random_te_cache: dict[str, np.ndarray] = {}
        self._compiled: dict[int, "_Compiled"] = {}

    # -- helpers ----------------------------------------------------------

    def _te(self, ts: Timestamp | None, relation_key: str | None = None) -> np.ndarray:
        cfg = self.config
        if cfg.ablated("te"):
            return np.zeros(cfg.te_dim)
        if ts is not None:
            return time_encode(ts, cfg.te_dim)
        # Timestamp-less relation: seeded, cached random substitute.
        key = relation_key or "<none>"
        if key not in self._random_te_cache:
            key_seed = (zlib.crc32(f"te:{key}".encode()) ^ cfg.seed) & 0xFFFFFFFF
            self._random_te_cache[key] = np.random.default_rng(key_seed).uniform(
                -1.0, 1.0, cfg.te_dim
            )
        return self._random_te_cache[key]

    def _dropout(self, x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
        if rng is None or p <= 0.0:
            return x
        mask = (rng.random(x.shape) >= p) / (1.0 - p)
        return x * ad.constant(mask)

    def init_question(self, qa: QuestionAnalysis, rng=None) -> Tensor:
        cfg = self.config
        tce = np.zeros(4) if cfg.ablated("tce") else np.array(qa.categories, dtype=float)
        tse = np.zeros(7) if cfg.ablated("tse") else np.array(qa.signals, dtype=float)
        seq = [self.tables.word(tok) for tok in qa.tokens]
        if rng is not None and cfg.lstm_dropout > 0.0:
            seq = [self._dropout(x, cfg.lstm_dropout, rng) for x in seq]
        encoded = lstm_encode(seq, self.store, "q.lstm", cfg.dim)
        cat = ad.concat([ad.constant(tce), ad.constant(tse), encoded])
        return ffn(cat, self.store, "q.init", cfg.dim)

    def update_question(self, h_q: Tensor, entity_states: list[Tensor]) -> Tensor:
        if not entity_states:
            return h_q
        total = entity_states[0]
        for s in entity_states[1:]:
            total = total + s
        return ffn(total, self.store, "q.update", self.config.dim)

    def init_entity(
        self,
        node_id: str,
        kind: str,
        ts: Timestamp | None,
        words: Sequence[str] | None = None,
    ) -> Tensor:
        if kind == "timestamp":
            te = ad.constant(self._te(ts))
            return ffn(te, self.store, "ts.proj", self.config.dim, activation=None)
        return self.tables.entity(node_id, words)

    def encode_tee(
        self,
        refs: Sequence[TemporalFactRef],
        states: dict[str, Tensor],
        rng=None,
    ) -> Tensor:
        """LSTM over chronologically ordered temporal-fact encodings; zero
        vector when the node has no temporal facts."""
        cfg = self.config
        if cfg.ablated("tee") or not refs:
            return ad.constant(np.zeros(cfg.dim))
        refs = refs[: cfg.max_temporal_facts]
        seq = []
        for ref in refs:
            ent_vecs = [states[e] for e in ref.entity_ids if e in states]
            if ent_vecs:
                total = ent_vecs[0]
                for v in ent_vecs[1:]:
                    total = total + v
                ents = total * (1.0 / len(ent_vecs))
            else:
                ents = ad.constant(np.zeros(cfg.dim))
            rel = self.tables.relation(ref.words)
            te = np.zeros(cfg.te_dim)
            for ts in ref.timestamps:
                te = te + self._te(ts)
            enc = ad.concat([ents, rel, ad.constant(te)])
            if rng is not None and cfg.lstm_dropout > 0.0:
                enc = self._dropout(enc, cfg.lstm_dropout, rng)
            seq.append(enc)
        return lstm_encode(seq, self.store, "tee.lstm", cfg.dim)

    def atr_logits(self, edges: Sequence[RelEdge], h_q: Tensor) -> Tensor:
        """Unnormalized attention logits, one per edge (Eq. style: projected
        relation-plus-time encoding dotted with the question state)."""
        cfg = self.config
        rel_rows = ad.stack_rows([self.tables.relation(e.words) for e in edges])
        te_rows = ad.constant(
            np.stack([self._te(e.timestamp, e.relation) for e in edges])
        )
        cat = ad.concat([rel_rows, te_rows], axis=1)
        projected = ffn(cat, self.store, "atr.proj", cfg.dim, activation=None)
        return projected @ h_q  # (n_edges,)

    def attention_weights(self, example: QAExample) -> np.ndarray:
        """Per-edge attention at the first layer on the inference path, in
        `example.graph.edges` order; normalized over each node's outgoing
        edges."""
        cfg = self.config
        comp = self._compile(example)
        n = len(comp.nodes)
        n_edges = len(comp.src_idx)
        if not n_edges:
            return np.zeros(0)
        if cfg.ablated("atr"):
            return comp.uniform_att.reshape(-1)
        if comp.words:
            w_matrix = ad.stack_rows([self.tables.word(w) for w in comp.words])
        else:
            w_matrix = ad.constant(np.zeros((0, cfg.dim)))
        h_q = self.init_question(example.qa)
        rel_rows = ad.constant(comp.rel_avg) @ w_matrix
        cat = ad.concat([rel_rows, ad.constant(comp.edge_te)], axis=1)
        projected = ffn(cat, self.store, "atr.proj", cfg.dim, activation=None)
        logits = (projected @ h_q).data
        expd = np.exp(logits - logits.max())
        denom = np.zeros(n)
        np.add.at(denom, comp.src_idx, expd)
        return expd / denom[comp.src_idx]

    def _compile(self, example: QAExample) -> "_Compiled":
        """Constant index matrices for the batched forward pass, cached per
        example object."""
        cached = self._compiled.get(id(example))
        if cached is not None:
            return cached
        cfg = self.config
        rg = example.graph
        ent_nodes = [n for n in rg.nodes if rg.kinds[n] != "timestamp"]
        ts_nodes = [n for n in rg.nodes if rg.kinds[n] == "timestamp"]
        nodes = ent_nodes + ts_nodes
        index = {n: i for i, n in enumerate(nodes)}
        n = len(nodes)

        ts_te = (
            np.stack([self._te(rg.timestamps[m]) for m in ts_nodes])
            if ts_nodes
            else np.zeros((0, cfg.te_dim))
        )

        word_set: set[str] = set()
        for e in rg.edges:
            word_set.update(e.words)
        for refs in rg.temporal.values():
            for ref in refs[: cfg.max_temporal_facts]:
                word_set.update(ref.words)

        def tied_words(m: str) -> tuple[str, ...] | None:
            """Label words when x_m is the word average (no dedicated vector)."""
            ws = rg.node_words.get(m)
            if (
                ws
                and f"emb.ent.{m}" not in self.store.params
                and f"ent:{m}" not in self.tables.pretrained
            ):
                return ws
            return None

        ent_words = [tied_words(m) for m in ent_nodes]
        all_tied = all(ws is not None for ws in ent_words)
        if all_tied:
            for ws in ent_words:
                word_set.update(ws)
        words = sorted(word_set)
        word_index = {w: i for i, w in enumerate(words)}

        ent_avg = None
        if all_tied and ent_nodes:
            ent_avg = np.zeros((len(ent_nodes), len(words)))
            for i, ws in enumerate(ent_words):
                for w in ws:
                    ent_avg[i, word_index[w]] += 1.0 / len(ws)

        n_edges = len(rg.edges)
        rel_avg = np.zeros((n_edges, len(words)))
        edge_te = np.zeros((n_edges, cfg.te_dim))
        src_idx = np.empty(n_edges, dtype=np.intp)
        dst_idx = np.empty(n_edges, dtype=np.intp)
        fact_ids = sorted({e.fact_id for e in rg.edges})
        fact_index = {f: i for i, f in enumerate(fact_ids)}
        fact_of_edge = np.empty(n_edges, dtype=np.intp)
        for i, e in enumerate(rg.edges):
            for w in e.words:
                rel_avg[i, word_index[w]] += 1.0 / len(e.words)
            edge_te[i] = self._te(e.timestamp, e.relation)
            src_idx[i] = index[e.src]
            dst_idx[i] = index[e.dst]
            fact_of_edge[i] = fact_index[e.fact_id]

        adjacency: dict[str, list[str]] = {m: [] for m in nodes}
        for e in rg.edges:
            adjacency[e.src].append(e.dst)
        seeds = sorted(set(example.qa.entities) & set(nodes)) or list(nodes)
        ppr_scores = ppr(adjacency, seeds, alpha=cfg.ppr_alpha, tol=cfg.ppr_tol)
        ppr_col = np.array([[ppr_scores[e.src]] for e in rg.edges])

        if n_edges:
            out_deg = np.zeros(n)
            np.add.at(out_deg, src_idx, 1.0)
            uniform_att = (1.0 / out_deg[src_idx]).reshape(-1, 1)
        else:
            uniform_att = np.zeros((0, 1))

        # TEE packing: nodes with temporal facts, longest sequence first, so
        # the active set at every step is a prefix of the order.
        tee_items = sorted(
            ((m, rg.temporal[m][: cfg.max_temporal_facts]) for m in rg.temporal),
            key=lambda t: (-len(t[1]), t[0]),
        )
        tee_node_rows = [index[m] for m, _ in tee_items]
        tee_lens = [len(refs) for _, refs in tee_items]
        tee_steps = []
        for t in range(max(tee_lens, default=0)):
            b = sum(1 for ln in tee_lens if ln > t)
            m_ents = np.zeros((b, n))
            m_rel = np.zeros((b, len(words)))
            te_rows = np.zeros((b, cfg.te_dim))
            for j in range(b):
                ref = tee_items[j][1][t]
                members = [index[e] for e in ref.entity_ids if e in index]
                for row in members:
                    m_ents[j, row] += 1.0 / len(members)
                for w in ref.words:
                    m_rel[j, word_index[w]] += 1.0 / len(ref.words)
                for ts in ref.timestamps:
                    te_rows[j] += self._te(ts)
            tee_steps.append((m_ents, m_rel, te_rows))

        candidates = rg.candidate_nodes()
        comp = _Compiled(
            nodes=nodes,
            ent_nodes=ent_nodes,
            ts_te=ts_te,
            words=words,
            rel_avg=rel_avg,
            edge_te=edge_te,
            src_idx=src_idx,
            dst_idx=dst_idx,
            n_facts=len(fact_ids),
            fact_of_edge=fact_of_edge,
            ppr_col=ppr_col,
            uniform_att=uniform_att,
            q_ent_idx=np.array(
                [index[m] for m in sorted(example.qa.entities) if m in index],
                dtype=np.intp,
            ),
            tee_node_rows=tee_node_rows,
            tee_lens=tee_lens,
            tee_steps=tee_steps,
            candidates=candidates,
            cand_idx=np.array([index[c] for c in candidates], dtype=np.intp),
            ent_avg=ent_avg,
        )
        self._compiled[id(example)] = comp
        return comp

    def _tee_batched(self, comp: "_Compiled", h: Tensor, w_matrix: Tensor, rng) -> Tensor:
        """Packed-sequence LSTM over every node's chronological temporal
        facts; returns an (n_nodes, dim) matrix with zero rows for nodes
        without temporal facts."""
        cfg = self.config
        n = len(comp.nodes)
        finished_blocks: list[Tensor] = []
        finished_rows: list[int] = []
        hb = cb = None
        n_steps = len(comp.tee_steps)
        for t, (m_ents, m_rel, te_rows) in enumerate(comp.tee_steps):
            b = m_ents.shape[0]
            if hb is None:
                hb = ad.constant(np.zeros((b, cfg.dim)))
                cb = ad.constant(np.zeros((b, cfg.dim)))
            elif b < hb.shape[0]:
                keep = np.arange(b)
                hb = ad.gather_rows(hb, keep)
                cb = ad.gather_rows(cb, keep)
            parts = [ad.constant(m_ents) @ h]
            if comp.words:
                parts.append(ad.constant(m_rel) @ w_matrix)
            else:
                parts.append(ad.constant(np.zeros((b, cfg.dim))))
            parts.append(ad.constant(te_rows))
            x = ad.concat(parts, axis=1)
            if rng is not None and cfg.lstm_dropout > 0.0:
                x = self._dropout(x, cfg.lstm_dropout, rng)
            hb, cb = lstm_cell(x, hb, cb, self.store, "tee.lstm", cfg.dim)
            b_next = comp.tee_steps[t + 1][0].shape[0] if t + 1 < n_steps else 0
            if b_next < b:
                finished_blocks.append(ad.gather_rows(hb, np.arange(b_next, b)))
                finished_rows.extend(comp.tee_node_rows[b_next:b])
        stacked = (
            finished_blocks[0]
            if len(finished_blocks) == 1
            else ad.concat(finished_blocks, axis=0)
        )
        return ad.scatter_sum(stacked, np.array(finished_rows, dtype=np.intp), n)

    def forward(
        self, example: QAExample, rng: np.random.Generator | None = None
    ) -> tuple[list[str], Tensor]:
        """Returns (candidate node ids, probability tensor in the same order).

        `rng` enables the training-time dropouts; None means inference.
        """
        cfg = self.config
        comp = self._compile(example)
        n = len(comp.nodes)
        n_edges = len(comp.src_idx)

        if comp.words:
            w_matrix = ad.stack_rows([self.tables.word(w) for w in comp.words])
        else:
            w_matrix = ad.constant(np.zeros((0, cfg.dim)))
        if comp.ent_avg is not None:
            h = ad.constant(comp.ent_avg) @ w_matrix
        elif comp.ent_nodes:
            rg = example.graph
            h = ad.stack_rows(
                [self.tables.entity(m, rg.node_words.get(m)) for m in comp.ent_nodes]
            )
        else:
            h = ad.constant(np.zeros((0, cfg.dim)))
        if comp.ts_te.shape[0]:
            ts_rows = ffn(
                ad.constant(comp.ts_te), self.store, "ts.proj", cfg.dim, activation=None
            )
            h = ad.concat([h, ts_rows], axis=0)
        h_q = self.init_question(example.qa, rng)

        edge_mask = None
        if rng is not None and cfg.fact_dropout > 0.0 and n_edges:
            dropped = rng.random(comp.n_facts) < cfg.fact_dropout
            mask = (~dropped)[comp.fact_of_edge].astype(float)
            if mask.sum() > 0.0:
                edge_mask = ad.constant(mask.reshape(-1, 1))

        for _layer in range(cfg.layers):
            if comp.tee_steps and not cfg.ablated("tee"):
                tee_matrix = self._tee_batched(comp, h, w_matrix, rng)
            else:
                tee_matrix = ad.constant(np.zeros((n, cfg.dim)))

            if n_edges:
                rel_rows = ad.constant(comp.rel_avg) @ w_matrix
                if cfg.ablated("atr"):
                    att = ad.constant(comp.uniform_att)
                else:
                    cat = ad.concat([rel_rows, ad.constant(comp.edge_te)], axis=1)
                    projected = ffn(
                        cat, self.store, "atr.proj", cfg.dim, activation=None
                    )
                    logits = projected @ h_q
                    # Per-source-node softmax from graph primitives.
                    shifted = logits - ad.constant(np.max(logits.data))
                    expd = ad.exp(shifted)
                    denom_per_node = ad.scatter_sum(expd, comp.src_idx, n)
                    denom = ad.gather_rows(denom_per_node, comp.src_idx)
                    att = _as_column(expd / denom)
                h_src = ad.gather_rows(h, comp.src_idx)
                psi_in = ad.concat([rel_rows, h_src], axis=1)
                psi = ffn(psi_in, self.store, "psi", cfg.dim)
                messages = att * (ad.constant(comp.ppr_col) * psi)
                if edge_mask is not None:
                    messages = messages * edge_mask
                agg = ad.scatter_sum(messages, comp.dst_idx, n)
            else:
                agg = ad.constant(np.zeros((n, cfg.dim)))

            update_in = ad.concat(
                [h, ad.repeat_row(h_q, n), tee_matrix, agg], axis=1
            )
            if rng is not None and cfg.linear_dropout > 0.0:
                update_in = self._dropout(update_in, cfg.linear_dropout, rng)
            h_new = ffn(update_in, self.store, "ent.update", cfg.dim)

            # Question update from the pre-update entity states.
            if comp.q_ent_idx.size:
                q_sum = ad.tsum(ad.gather_rows(h, comp.q_ent_idx), axis=0)
                h_q = ffn(q_sum, self.store, "q.update", cfg.dim)
            h = h_new

        final = ad.gather_rows(h, comp.cand_idx)
        w = self.store.get("cls.w", (cfg.dim,))
        b = self.store.zeros("cls.b", (1,))
        logits = final @ w + b
        probs = ad.sigmoid(logits)
        return list(comp.candidates), probs


@dataclass
class _Compiled:
    nodes: list[str]
    ent_nodes: list[str]
    ts_te: np.ndarray
    words: list[str]
    rel_avg: np.ndarray
    edge_te: np.ndarray
    src_idx: np.ndarray
    dst_idx: np.ndarray
    n_facts: int
    fact_of_edge: np.ndarray
    ppr_col: np.ndarray
    uniform_att: np.ndarray
    q_ent_idx: np.ndarray
    tee_node_rows: list[int]
    tee_lens: list[int]
    tee_steps: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    candidates: list[str]
    cand_idx: np.ndarray
    ent_avg: np.ndarray | None = None


def _as_column(v: Tensor) -> Tensor:
    out = Tensor(v.data.reshape(-1, 1), parents=(v,))
    out._backward = lambda g: v._accumulate(g.reshape(v.shape)) if v.requires_grad else None
    return out


def predict(model: Model, example: QAExample) -> list[tuple[str, float]]:
    """Ranked (node, probability), descending probability, ties by node id."""
    if not example.graph.nodes:
        return []
    candidates, probs = model.forward(example, rng=None)
    ranked = sorted(zip(candidates, probs.data), key=lambda t: (-t[1], t[0]))
    return [(n, float(p)) for n, p in ranked]


def bce_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    eps = 1e-12
    y = ad.constant(labels)
    clipped = Tensor(np.clip(probs.data, eps, 1.0 - eps), parents=(probs,))
    clipped._backward = lambda g: probs._accumulate(g) if probs.requires_grad else None
    loss_terms = (
        y * ad.log(clipped) + (ad.constant(1.0) - y) * ad.log(ad.constant(1.0) - clipped)
    )
    return ad.tsum(loss_terms) * (-1.0 / max(len(labels), 1))


def train(
    model: Model,
    examples: Sequence[QAExample],
    epochs: int | None = None,
    log_fn=None,
    dev_examples: Sequence[QAExample] | None = None,
) -> list[float]:
    """Mini-batch gradient descent on BCE; returns per-epoch mean loss.

    With `dev_examples`, parameters are snapshotted after every epoch and the
    snapshot with the best dev P@1 (earliest epoch on ties) is restored at
    the end — plain early stopping against the dev split.
    """
    cfg = model.config
    usable = [ex for ex in examples if ex.gold & set(ex.graph.candidate_nodes())]
    if not usable:
        raise ValueError("no trainable example has a gold answer in its graph")
    n_epochs = cfg.epochs if epochs is None else epochs
    opt = Adam(model.store, lr=cfg.learning_rate, clip=cfg.gradient_clip)
    history: list[float] = []
    best_p1 = -1.0
    best_params: dict[str, np.ndarray] | None = None
    for epoch in range(n_epochs):
        opt.lr = cfg.learning_rate * cfg.lr_decay**epoch
        rng = np.random.default_rng((cfg.seed, epoch))
        order = rng.permutation(len(usable))
        total_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [usable[i] for i in order[start : start + cfg.batch_size]]
            model.store.zero_grad()
            batch_loss = None
            for ex in batch:
                candidates, probs = model.forward(ex, rng=rng)
                labels = np.array([int(n in ex.gold) for n in candidates], dtype=float)
                loss = bce_loss(probs, labels) * (1.0 / len(batch))
                batch_loss = loss if batch_loss is None else batch_loss + loss
            if not np.isfinite(batch_loss.data):
                raise ad.NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            batch_loss.backward()
            opt.step()
            total_loss += float(batch_loss.data) * len(batch)
        mean_loss = total_loss / len(usable)
        history.append(mean_loss)
        if dev_examples:
            rankings = [predict(model, ex) for ex in dev_examples]
            hits = sum(
                1.0
                for ranked, ex in zip(rankings, dev_examples)
                if ranked and ranked[0][0] in ex.gold
            )
            dev_p1 = hits / len(dev_examples)
            if dev_p1 > best_p1:
                best_p1 = dev_p1
                best_params = {
                    name: p.data.copy() for name, p in model.store.params.items()
                }
        if log_fn:
            log_fn(epoch, mean_loss)
    if best_params is not None:
        for name, data in best_params.items():
            model.store.params[name].data[...] = data
    return history


@dataclass(frozen=True)
class Metrics:
    p_at_1: float
    mrr: float
    hit_at_5: float
    n_questions: int


def evaluate(
    rankings: Sequence[Sequence[str]], gold_sets: Sequence[Iterable[str]]
) -> Metrics:
    """P@1, MRR and Hit@5 averaged over questions; MRR is 0 when no correct
    answer appears anywhere in the ranking."""
    if len(rankings) != len(gold_sets):
        raise ValueError("rankings and gold sets must align")
    if not rankings:
        return Metrics(0.0, 0.0, 0.0, 0)
    p1 = mrr = hit5 = 0.0
    for ranking, gold in zip(rankings, gold_sets):
        gold = set(gold)
        first_rank = next(
            (i + 1 for i, n in enumerate(ranking) if n in gold), None
        )
        if first_rank is not None:
            p1 += 1.0 if first_rank == 1 else 0.0
            mrr += 1.0 / first_rank
            hit5 += 1.0 if first_rank <= 5 else 0.0
    n = len(rankings)
    return Metrics(p1 / n, mrr / n, hit5 / n, n)
